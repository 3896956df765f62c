use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polylab_cli::config::blob_hash;

fn polylab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polylab"))
        .args(args)
        .arg("--set")
        .arg(format!("out.dir={}", out.display()))
        .output()
        .expect("binary runs")
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> =
        fs::read_dir(out).map(|r| r.map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect()).unwrap_or_default();
    dirs.sort();
    dirs
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn selftest_passes_and_writes_a_hashed_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polylab(tmp.path(), &["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dirs = run_dirs(tmp.path());
    assert_eq!(dirs.len(), 1);
    let name = dirs[0].file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.starts_with("selftest-") && name.ends_with("-seed1"), "{name}");

    let manifest = fs::read_to_string(dirs[0].join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("subcommand: selftest\n"));
    assert!(manifest.contains("[config]\nmc.seed = 1\n"));
    let outputs = manifest.split("[outputs]\n").nth(1).unwrap();
    let mut listed = 0;
    for line in outputs.lines() {
        let (hash, file) = line.split_once("  ").unwrap();
        let body = fs::read(dirs[0].join(file)).unwrap();
        assert_eq!(hash, blob_hash(&body), "{file}");
        listed += 1;
    }
    assert!(listed >= 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["subcommand"], "selftest");
}

#[test]
fn missing_config_file_is_an_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.ini");
    let o = polylab(tmp.path(), &["selftest", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.ini"), "{}", stderr(&o));
    assert!(run_dirs(tmp.path()).is_empty());
}

#[test]
fn unknown_key_lists_valid_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polylab(tmp.path(), &["selftest", "--set", "mc.sed=3"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("mc.sed") && err.contains("mc.seed"), "{err}");
}

#[test]
fn malformed_config_line_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.ini");
    fs::write(&path, "[mc]\nseed 3\n").unwrap();
    let o = polylab(tmp.path(), &["selftest", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_sections_and_overrides_resolve_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.ini");
    fs::write(&path, "# small run\n[mc]\nrealizations = 8\nseed = 5\n\n[grid]\nN = 64\n").unwrap();
    let o = polylab(tmp.path(), &["she-run", "--config", path.to_str().unwrap(), "--set", "mc.seed=7"]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let dirs = run_dirs(tmp.path());
    assert!(dirs[0].to_string_lossy().ends_with("-seed7"));
    let echo = fs::read_to_string(dirs[0].join("config.ini")).unwrap();
    for line in ["mc.realizations = 8", "mc.seed = 7", "grid.N = 64", "grid.L = 8"] {
        assert!(echo.lines().any(|l| l == line), "{line} missing from\n{echo}");
    }
    assert!(dirs[0].join("mean_law.csv").exists());
}

#[test]
fn failed_check_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polylab(tmp.path(), &["error-form", "--set", "mc.realizations=8", "--set", "error.budget=0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("FAIL error_form_beta0")), "{out}");
    let dirs = run_dirs(tmp.path());
    let checks = fs::read_to_string(dirs[0].join("checks.csv")).unwrap();
    assert!(checks.contains("error_form_beta0,false"), "{checks}");
}

#[test]
fn keys_flag_prints_defaults_without_running() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polylab(tmp.path(), &["rd-scaling", "--keys"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("scaling.p") && l.contains("1,2,4")), "{out}");
    assert!(run_dirs(tmp.path()).is_empty());
}

#[test]
fn scaling_flags_are_restricted_to_rd_scaling() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polylab(tmp.path(), &["she-run", "--p", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rd-scaling"));
    let o = polylab(tmp.path(), &["rd-scaling", "--t-max", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config_values() {
    let cli = <polylab_cli::Cli as clap::Parser>::parse_from([
        "polylab",
        "rd-scaling",
        "--set",
        "time.T=10",
        "--t-max",
        "1e3",
        "--p",
        "2",
    ]);
    let cfg = polylab_cli::resolve(&cli).unwrap();
    assert_eq!(cfg.f64("time.T").unwrap(), 1e3);
    assert_eq!(cfg.f64_list("scaling.p").unwrap(), vec![2.0]);
}

#[test]
fn aborted_run_keeps_the_last_good_state() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polylab(
        tmp.path(),
        &[
            "rd-run",
            "--set",
            "init.q0=bump:2",
            "--set",
            "grid.L=2e4",
            "--set",
            "grid.N=65536",
            "--set",
            "time.T=1",
            "--set",
            "rescale.beta=0",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run aborted"), "{}", stderr(&o));
    let dir = &run_dirs(tmp.path())[0];
    let snapshot = fs::read_to_string(dir.join("last_good.txt")).unwrap();
    let (head, field) = polylab::snapshot::read_snapshot(&snapshot).unwrap();
    assert_eq!(head.points, 65536);
    assert!((field.mass() - 1.0).abs() < 1e-10);
    let partial = fs::read_to_string(dir.join("diagnostics_partial.csv")).unwrap();
    assert!(partial.starts_with("t,M,E,D,mass,m1,m2,m4,clamped_mass,leakage\n"));
    assert!(fs::read_to_string(dir.join("manifest.txt")).unwrap().contains("last_good.txt"));
}
