//! Command-line driver: each experiment is a subcommand reading a flat
//! config file and writing CSV artifacts into a fresh run directory.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on any
//! error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{execute, Check, Outcome, Subcommand};
pub use config::Config;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "polylab", version, about = "Reaction-diffusion, stochastic heat equation and hierarchy experiments")]
pub struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    pub command: Subcommand,
    /// Config file with `[section]` headers and `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set grid.N=256`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Moment order to fit (rd-scaling; sets `scaling.p`).
    #[arg(long)]
    pub p: Option<String>,
    /// Final time (rd-scaling; sets `time.T`).
    #[arg(long = "t-max")]
    pub t_max: Option<String>,
    /// Print the subcommand's keys with their defaults and exit.
    #[arg(long)]
    pub keys: bool,
}

/// Resolves defaults, then the config file, then `--set`, then the
/// dedicated flags.
pub fn resolve(cli: &Cli) -> Result<Config> {
    let mut entries = Vec::new();
    if let Some(path) = &cli.config {
        entries.extend(config::read_file(path)?);
    }
    for s in &cli.set {
        entries.push(config::parse_override(s)?);
    }
    if cli.p.is_some() || cli.t_max.is_some() {
        if cli.command != Subcommand::RdScaling {
            return Err(CliError::Config("--p and --t-max apply to rd-scaling only".into()));
        }
        if let Some(p) = &cli.p {
            entries.push(("scaling.p".into(), p.clone()));
        }
        if let Some(t) = &cli.t_max {
            entries.push(("time.T".into(), t.clone()));
        }
    }
    Config::resolve(&cli.command.keys(), &entries)
}

fn keys_table(sub: Subcommand) -> String {
    sub.keys().iter().map(|k| format!("{:<28} {:<40} {}\n", k.key, k.default, k.help)).collect()
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if cli.keys {
        print!("{}", keys_table(cli.command));
        return 0;
    }
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ").to_string();
    let dir = match output::create_run_dir(cli.command, &cfg, &stamp) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = execute(cli.command, &cfg);
    let (files, code) = match &result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for c in &out.checks {
                println!("{} {:<32} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            (output::outcome_files(cli.command, &cfg, out), if out.pass() { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            (output::failure_files(&cfg, e), 1)
        }
    };
    if let Err(e) = output::write_outputs(&dir, cli.command, &cfg, &stamp, &files) {
        eprintln!("error: {e}");
        return 1;
    }
    println!("run directory: {}", dir.display());
    code
}
