use polylab::hierarchy::{self as hier, TestFunction, WeakFormLedger};
use polylab::she::{SheConfig, SheRunner};

use super::{num, she_config, Outcome};
use crate::config::{key, Config, KeySpec};
use crate::error::{CliError, Result};

#[allow(clippy::too_many_arguments)]
fn model_keys(
    l: &'static str,
    n: &'static str,
    d: &'static str,
    beta: &'static str,
    kernel: &'static str,
    width: &'static str,
    q0: &'static str,
    reals: &'static str,
) -> Vec<KeySpec> {
    vec![
        key("grid.L", l, "half-width of the periodic box"),
        key("grid.N", n, "points per axis (power of two)"),
        key("grid.d", d, "spatial dimension"),
        key("model.beta", beta, "inverse temperature"),
        key("model.kernel", kernel, "covariance kernel: dirac, bump or box"),
        key("model.phi_width", width, "support diameter of the mollifier for bump and box"),
        key("init.q0", q0, "initial density: bump:<w>, delta, gaussian:<var>, plateau:<h>[:<edge>]"),
        key("mc.realizations", reals, "number of realizations"),
        key("mc.seed", "1", "master seed"),
    ]
}

pub(super) fn weak_keys() -> Vec<KeySpec> {
    let mut k = model_keys("8", "128", "1", "0.5", "dirac", "1", "delta", "10000");
    k.extend([
        key("time.dt", "auto", "time step; auto is Δx²/2"),
        key("time.T", "1", "final time"),
        key("hierarchy.n", "1", "order of the identity (1 or 2)"),
        key("hierarchy.f", "gauss:1", "test function: one, x2, gauss:<w>, ramp:<v1,v2,v3>:<b>:<cap>"),
        key("hierarchy.budget", "1e-4", "time-quadrature budget added to 3 stderr"),
        key("hierarchy.one_realizations", "256", "realizations for the f = 1 ledger, which is exact per realization"),
    ]);
    k
}

pub(super) fn generator_keys() -> Vec<KeySpec> {
    let mut k = model_keys("16", "128", "1", "0.5", "dirac", "1", "gaussian:1", "40000");
    k.extend([
        key("generator.f", "x2", "test function: one, x2, gauss:<w>, ramp:<v1,v2,v3>:<b>:<cap>"),
        key("generator.T_list", "0.02,0.01,0.005", "horizons, each half the previous"),
        key("generator.steps", "4", "time steps per horizon"),
    ]);
    k
}

pub(super) fn error_keys() -> Vec<KeySpec> {
    let mut k = model_keys("16", "128", "1", "0.3", "bump", "1", "delta", "10000");
    k.extend([
        key("time.dt", "auto", "time step; auto is Δx²/2"),
        key("error.h", "x2", "terminal function h: one, x2, gauss:<w>, ramp:<v1,v2,v3>:<b>:<cap>"),
        key("error.eps", "0.5", "scale ε; the horizon is 1/ε²"),
        key("error.budget", "1e-10", "quadrature budget added to 3 combined stderr"),
    ]);
    k
}

pub(super) fn msd_keys() -> Vec<KeySpec> {
    let mut k = model_keys("24", "32", "3", "0.2", "bump", "6", "delta", "500");
    k.extend([
        key("time.dt", "0.5", "time step; auto is Δx²/2"),
        key("msd.T_list", "1,2,4,8", "increasing horizons"),
        key("msd.ramps", "20", "random Lipschitz ramps in the Wasserstein proxy"),
        key("msd.annealed_T", "1,2,4", "times of the annealed ratio probes"),
    ]);
    k
}

fn test_function(c: &Config, k: &str) -> Result<TestFunction> {
    Ok(TestFunction::parse(&c.string(k)?)?)
}

fn ledger_check(out: &mut Outcome, name: &str, l: &WeakFormLedger) {
    out.check(
        name,
        l.pass,
        format!(
            "residual {:.3e} ± {:.3e} (budget {:.1e}, rss {:.3e})",
            l.residual.mean, l.residual.stderr, l.budget, l.rss_stderr
        ),
    );
}

pub(super) fn hierarchy_check(c: &Config) -> Result<Outcome> {
    let t = c.f64("time.T")?;
    let cfg = she_config(c, t)?;
    let n = c.usize("hierarchy.n")?;
    let f = test_function(c, "hierarchy.f")?;
    let budget = c.f64("hierarchy.budget")?;
    let runner = SheRunner::new(&cfg)?;
    let ledger = hier::weak_residual(&runner, n, &f, budget)?;
    let mut out = Outcome::default();
    out.file("ledger.csv", ledger.to_csv());
    ledger_check(&mut out, "weak_residual", &ledger);
    out.discards("ensemble", &ledger.discards);
    out.check("confidence", !ledger.low_confidence, format!("{} realizations", ledger.residual.n));
    out.metric("residual", ledger.residual.mean);
    out.metric("residual_stderr", ledger.residual.stderr);

    let ones = c.usize("hierarchy.one_realizations")?.clamp(2, cfg.realizations);
    let runner1 = SheRunner::new(&SheConfig { realizations: ones, ..cfg.clone() })?;
    let one = hier::weak_residual(&runner1, n, &TestFunction::Constant, 0.0)?;
    out.file("ledger_one.csv", one.to_csv());
    out.check(
        "constant_ledger_exact",
        one.residual.mean == 0.0 && one.residual.stderr == 0.0 && one.discards.is_empty(),
        format!("residual {:e} ± {:e} over {} realizations", one.residual.mean, one.residual.stderr, one.residual.n),
    );
    Ok(out)
}

pub(super) fn generator_check(c: &Config) -> Result<Outcome> {
    let t_list = c.f64_list("generator.T_list")?;
    if t_list.len() < 2 || t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("generator.T_list needs at least two decreasing horizons".into()));
    }
    let steps = c.usize("generator.steps")?;
    let f = test_function(c, "generator.f")?;
    let base = she_config_for_horizon(c, t_list[0], steps)?;
    let table = hier::generator_check(&base, &f, &t_list, steps)?;
    let mut out = Outcome::default();
    out.file("generator.csv", table.to_csv());
    for r in &table.rows {
        out.discards(&format!("horizon_{}", r.t), &r.discards);
    }
    let ratios: Vec<String> = table.ratios.iter().map(|r| format!("{:.3} ± {:.3}", r.mean, r.stderr)).collect();
    out.check(
        "deviation_halving",
        table.pass,
        format!(
            "ratios [{}] vs [{}, {}] within 2 stderr",
            ratios.join(", "),
            hier::HALVING_RATIO.0,
            hier::HALVING_RATIO.1
        ),
    );
    out.metric("rhs", table.rhs);
    out.metric("diffusion", table.diffusion);
    for (i, r) in table.ratios.iter().enumerate() {
        out.metric(&format!("ratio_{i}"), r.mean);
        out.metric(&format!("ratio_stderr_{i}"), r.stderr);
    }

    let zero = SheConfig { beta: 0.0, realizations: 2, ..base };
    let t0 = hier::generator_check(&zero, &f, &t_list, steps)?;
    out.file("generator_beta0.csv", t0.to_csv());
    let dev = t0.rows.iter().map(|r| (r.slope.mean - t0.diffusion).abs()).fold(0.0, f64::max);
    out.metric("beta0_deviation", dev);
    out.check("beta0_slope", dev <= 1e-8, format!("max |slope - <Δf/2, q0>| = {dev:.3e}"));
    Ok(out)
}

/// SHE configuration whose step fits the first horizon; the generator
/// check re-derives `dt` per horizon.
fn she_config_for_horizon(c: &Config, t: f64, steps: usize) -> Result<SheConfig> {
    if steps == 0 {
        return Err(CliError::Config("generator.steps must be positive".into()));
    }
    let grid = super::grid(c)?;
    let kernel = super::kernel(c, &grid)?;
    let mut cfg = SheConfig::new(
        kernel,
        c.f64("model.beta")?,
        t / steps as f64,
        t,
        c.usize("mc.realizations")?,
        c.u64("mc.seed")?,
    );
    cfg.initial = super::initial(c)?;
    cfg.threads = super::threads(c)?;
    cfg.validate()?;
    Ok(cfg)
}

pub(super) fn error_form(c: &Config) -> Result<Outcome> {
    let eps = c.f64("error.eps")?;
    if !(eps > 0.0) {
        return Err(CliError::Config("error.eps must be positive".into()));
    }
    let t = 1.0 / (eps * eps);
    let cfg = she_config(c, t)?;
    let h = test_function(c, "error.h")?;
    let budget = c.f64("error.budget")?;
    let runner = SheRunner::new(&cfg)?;
    let ef = hier::error_form(&runner, &h, eps, budget)?;
    let mut out = Outcome::default();
    let zero_runner = SheRunner::new(&SheConfig { beta: 0.0, realizations: 2, ..cfg.clone() })?;
    let zero = hier::error_form(&zero_runner, &h, eps, budget)?;
    let mut csv = format!("beta,{}\n", hier::ErrorForm::csv_header());
    csv.push_str(&format!("{},{}\n", num(cfg.beta), ef.csv_row()));
    csv.push_str(&format!("{},{}\n", num(0.0), zero.csv_row()));
    out.file("error_form.csv", csv);
    out.check(
        "error_form",
        ef.pass,
        format!(
            "lhs {:.5} ± {:.5}, rhs {:.5} ± {:.5}, |diff| vs 3·{:.5}",
            ef.lhs.mean, ef.lhs.stderr, ef.rhs.mean, ef.rhs.stderr, ef.combined_stderr
        ),
    );
    out.discards("ensemble", &ef.discards);
    let z = zero.lhs.mean.abs().max(zero.rhs.mean.abs());
    out.check("error_form_beta0", z <= budget, format!("max(|lhs|, |rhs|) = {z:.3e} at beta = 0"));
    out.metric("lhs", ef.lhs.mean);
    out.metric("rhs", ef.rhs.mean);
    out.metric("combined_stderr", ef.combined_stderr);
    out.metric("paired_difference", ef.difference.mean);
    out.metric("paired_difference_stderr", ef.difference.stderr);
    Ok(out)
}

pub(super) fn msd_trend(c: &Config) -> Result<Outcome> {
    let t_list = c.f64_list("msd.T_list")?;
    let annealed = c.f64_list("msd.annealed_T")?;
    let t_max = t_list.iter().chain(&annealed).copied().fold(0.0, f64::max);
    let cfg = she_config(c, t_max)?;
    let runner = SheRunner::new(&cfg)?;
    let table = hier::msd_trend(&runner, &t_list, c.usize("msd.ramps")?, &annealed)?;
    let mut out = Outcome::default();
    out.file("msd.csv", table.to_csv());
    out.file("annealed.csv", table.annealed_csv());
    out.discards("ensemble", &table.discards);
    let devs: Vec<String> =
        table.rows.iter().map(|r| format!("{}: {:.4} ± {:.4}", r.t, r.deviation, r.stderr)).collect();
    out.check("msd_nonincreasing", table.monotone, devs.join("; "));
    if let (Some(a), Some(b)) = (table.rows.iter().find(|r| r.t == 1.0), table.rows.iter().find(|r| r.t == 4.0)) {
        let gap = a.deviation - b.deviation;
        out.check(
            "msd_t4_below_t1",
            gap > a.stderr.hypot(b.stderr),
            format!("deviation drops by {gap:.4} (combined stderr {:.4})", a.stderr.hypot(b.stderr)),
        );
    }
    let w1: Vec<String> = table.rows.iter().map(|r| format!("{:.4}", r.marginal_w1)).collect();
    out.check("w1_decreasing", table.w1_decreasing, format!("marginal W1 [{}]", w1.join(", ")));
    out.metric("initial_m2", table.initial_m2);
    out.metric("slope", table.slope);
    out.metric("corrected_slope", table.corrected_slope);
    out.metric("corrected_monotone", f64::from(u8::from(table.corrected_monotone)));
    let amax = table.annealed.iter().map(|a| a.ratio.mean).fold(0.0, f64::max);
    out.metric("annealed_max_ratio", amax);
    Ok(out)
}
