//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then
//! asserts it.

use std::io::Write;
use std::sync::OnceLock;

use polylab_cli::{execute, Config, Outcome, Subcommand};

fn config(sub: Subcommand, overrides: &[(&str, &str)]) -> Config {
    let entries: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    Config::resolve(&sub.keys(), &entries).expect("acceptance config resolves")
}

fn run(sub: Subcommand, overrides: &[(&str, &str)]) -> Outcome {
    execute(sub, &config(sub, overrides)).unwrap_or_else(|e| panic!("{sub} failed: {e}"))
}

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name:<28} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

/// Joins the named checks into one verdict.
fn verdict(out: &Outcome, names: &[&str]) -> (bool, String) {
    let mut pass = true;
    let mut details = Vec::new();
    for n in names {
        match out.get_check(n) {
            Some(c) => {
                pass &= c.pass;
                details.push(format!("{n}: {}", c.detail));
            }
            None => {
                pass = false;
                details.push(format!("{n}: missing"));
            }
        }
    }
    (pass, details.join(" | "))
}

fn criterion(name: &str, out: &Outcome, checks: &[&str]) {
    let (pass, detail) = verdict(out, checks);
    report(name, pass, &detail);
}

fn scaling() -> &'static Outcome {
    static RUN: OnceLock<Outcome> = OnceLock::new();
    RUN.get_or_init(|| {
        run(
            Subcommand::RdScaling,
            &[
                ("model.beta", "1"),
                ("grid.L", "2e4"),
                ("grid.N", "65536"),
                ("init.q0", "gaussian:4"),
                ("time.T", "1e5"),
                ("scaling.fit_lo", "1e2"),
                ("scaling.fit_hi", "1e5"),
                ("scaling.p", "1,2,4"),
            ],
        )
    })
}

#[test]
fn moment_scaling() {
    criterion("moment_scaling", scaling(), &["slope_m1", "slope_m2"]);
}

#[test]
fn maximum_decay() {
    criterion("maximum_decay", scaling(), &["max_decay", "decay_stabilizes"]);
}

#[test]
fn dissipation_inequality() {
    criterion("dissipation_inequality", scaling(), &["dissipation"]);
}

#[test]
fn conservation_and_ordering() {
    criterion(
        "conservation_and_ordering",
        scaling(),
        &["mass_conservation", "energy_below_max", "energy_nonincreasing"],
    );
}

#[test]
fn beta_rescaling() {
    let out = run(Subcommand::RdRun, &[("model.beta", "1"), ("rescale.beta", "0.5")]);
    criterion("beta_rescaling", &out, &["rescale_matched", "rescale_refined"]);
}

#[test]
fn she_mean_law() {
    let out = run(
        Subcommand::SheRun,
        &[
            ("grid.d", "1"),
            ("model.kernel", "dirac"),
            ("model.beta", "0.5"),
            ("time.T", "1"),
            ("mc.realizations", "10000"),
        ],
    );
    criterion(
        "she_mean_law",
        &out,
        &["mean_u_x-2", "mean_u_x-1", "mean_u_x0", "mean_u_x1", "mean_u_x2", "mean_mass", "ensemble_no_discards"],
    );
}

#[test]
fn second_moment_oracle() {
    let out = run(
        Subcommand::QnEstimate,
        &[("grid.d", "1"), ("model.kernel", "bump"), ("model.beta", "0.5"), ("time.T", "1"), ("qn.n", "2")],
    );
    criterion("second_moment_oracle", &out, &["second_moment_oracle", "ensemble_no_discards"]);
}

#[test]
fn hierarchy_identity() {
    let out = run(
        Subcommand::HierarchyCheck,
        &[
            ("grid.d", "1"),
            ("model.kernel", "dirac"),
            ("model.beta", "0.5"),
            ("time.T", "1"),
            ("hierarchy.n", "1"),
            ("mc.realizations", "10000"),
        ],
    );
    criterion("hierarchy_identity", &out, &["weak_residual", "constant_ledger_exact", "ensemble_no_discards"]);
}

#[test]
fn generator() {
    let out = run(
        Subcommand::GeneratorCheck,
        &[("model.beta", "0.5"), ("generator.f", "x2"), ("generator.T_list", "0.02,0.01,0.005")],
    );
    let mut checks = vec!["deviation_halving", "beta0_slope"];
    let discards: Vec<String> =
        out.checks.iter().filter(|c| c.name.ends_with("_no_discards")).map(|c| c.name.clone()).collect();
    checks.extend(discards.iter().map(String::as_str));
    criterion("generator", &out, &checks);
}

#[test]
fn msd_trend_and_error_form() {
    let msd = run(Subcommand::MsdTrend, &[("grid.d", "3"), ("model.beta", "0.2"), ("msd.T_list", "1,2,4,8")]);
    let ef = run(Subcommand::ErrorForm, &[("grid.d", "1"), ("model.kernel", "bump")]);
    let (a, da) = verdict(&msd, &["msd_nonincreasing", "ensemble_no_discards"]);
    let (b, db) = verdict(&ef, &["error_form", "ensemble_no_discards"]);
    report("msd_trend_and_error_form", a && b, &format!("{da} | {db}"));
}

/// Small configurations, one per subcommand, for the rerun comparison.
fn small(sub: Subcommand) -> Vec<(&'static str, &'static str)> {
    match sub {
        Subcommand::RdRun => vec![("grid.L", "32"), ("grid.N", "1024"), ("time.T", "1")],
        Subcommand::RdScaling => vec![
            ("grid.L", "256"),
            ("grid.N", "4096"),
            ("time.T", "100"),
            ("scaling.fit_lo", "1"),
            ("scaling.fit_hi", "100"),
        ],
        Subcommand::SheRun => vec![("mc.realizations", "64")],
        Subcommand::QnEstimate => vec![("mc.realizations", "64"), ("qn.oracle", "false")],
        Subcommand::HierarchyCheck => vec![("mc.realizations", "64"), ("hierarchy.one_realizations", "8")],
        Subcommand::GeneratorCheck => vec![("mc.realizations", "256")],
        Subcommand::ErrorForm => vec![("mc.realizations", "64")],
        Subcommand::MsdTrend => vec![("mc.realizations", "16"), ("msd.ramps", "4")],
        Subcommand::ClosureCompare => vec![("mc.realizations", "64")],
        Subcommand::Selftest => vec![],
    }
}

fn csv_bodies(out: &Outcome) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = out.files.iter().filter(|(n, _)| n.ends_with(".csv")).cloned().collect();
    files.push(("checks.csv".into(), out.checks_csv()));
    files
}

#[test]
fn determinism() {
    let mut failures = Vec::new();
    for sub in Subcommand::ALL {
        let base = small(sub);
        let first = csv_bodies(&run(sub, &base));
        let second = csv_bodies(&run(sub, &base));
        if first != second {
            failures.push(format!("{sub} rerun"));
        }
        let mut threaded = base.clone();
        threaded.push(("threads", "3"));
        if csv_bodies(&run(sub, &threaded)) != first {
            failures.push(format!("{sub} threads"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} subcommands byte-identical across reruns and thread counts", Subcommand::ALL.len())
    } else {
        format!("differences: {}", failures.join(", "))
    };
    report("determinism", failures.is_empty(), &detail);
}
