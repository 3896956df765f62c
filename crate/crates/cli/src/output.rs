//! Run directories, manifests and summaries.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::commands::{Outcome, Subcommand};
use crate::config::{blob_hash, Config};
use crate::error::{CliError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Creates `<out.dir>/<sub>-<timestamp>[-seed<seed>]`, adding a counter
/// when the name is taken.
pub fn create_run_dir(sub: Subcommand, cfg: &Config, stamp: &str) -> Result<PathBuf> {
    let root = PathBuf::from(cfg.string("out.dir")?);
    fs::create_dir_all(&root).map_err(io_err(&root))?;
    let mut name = format!("{sub}-{stamp}");
    if sub.uses_seed() {
        name.push_str(&format!("-seed{}", cfg.u64("mc.seed")?));
    }
    let mut dir = root.join(&name);
    let mut k = 1;
    while dir.exists() {
        dir = root.join(format!("{name}-{k}"));
        k += 1;
    }
    fs::create_dir(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

/// `summary.json` contents.
pub fn summary(sub: Subcommand, cfg: &Config, outcome: &Outcome) -> Value {
    let metrics: Map<String, Value> = outcome
        .metrics
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number)))
        .collect();
    json!({
        "subcommand": sub.name(),
        "config_hash": cfg.hash(),
        "pass": outcome.pass(),
        "metrics": metrics,
    })
}

/// Writes every output file, then the manifest listing their hashes.
pub fn write_outputs(dir: &Path, sub: Subcommand, cfg: &Config, stamp: &str, files: &[(String, String)]) -> Result<()> {
    let mut manifest = format!(
        "subcommand: {sub}\ntimestamp: {stamp}\nconfig_hash: {}\n\n[config]\n{}\n[outputs]\n",
        cfg.hash(),
        cfg.echo()
    );
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        manifest.push_str(&format!("{}  {name}\n", blob_hash(body.as_bytes())));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(io_err(&path))
}

/// Files for a completed run: the outcome's files plus checks, summary
/// and config echo.
pub fn outcome_files(sub: Subcommand, cfg: &Config, outcome: &Outcome) -> Vec<(String, String)> {
    let mut files = outcome.files.clone();
    files.push(("checks.csv".into(), outcome.checks_csv()));
    let mut s = serde_json::to_string_pretty(&summary(sub, cfg, outcome)).expect("summary serializes");
    s.push('\n');
    files.push(("summary.json".into(), s));
    files.push(("config.ini".into(), cfg.echo()));
    if !outcome.warnings.is_empty() {
        files.push(("warnings.txt".into(), outcome.warnings.join("\n") + "\n"));
    }
    files
}

/// Files for a failed run: the error and, for solver aborts, the last
/// good state and the rows recorded before it.
pub fn failure_files(cfg: &Config, err: &CliError) -> Vec<(String, String)> {
    let mut files = vec![("error.txt".to_string(), format!("{err}\n")), ("config.ini".into(), cfg.echo())];
    if let CliError::Aborted { failure, beta, kernel } = err {
        files.push(("last_good.txt".into(), polylab::snapshot::write_snapshot(&failure.last_good, *beta, kernel)));
        files.push(("diagnostics_partial.csv".into(), failure.series.to_csv()));
    }
    files
}
