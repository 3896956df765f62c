use polylab::diagnostics::{
    dissipation_report, energy_below_max, fit_exponent, moment_lower_bound_report, rescaled_profile,
    supersolution_check, InequalityReport, MAX_DECAY_ENVELOPE,
};
use polylab::rd::{self, AdaptiveStep, DiagnosticSeries, RdConfig, RdRun};
use polylab::snapshot::write_snapshot;
use polylab::{DensityField, Grid, HeatSymbol, InitialData};

use super::{grid, initial, kernel, num, threads, Outcome};
use crate::config::{key, Config, KeySpec};
use crate::error::{CliError, Result};

const SOLVER_KEYS: [KeySpec; 12] = [
    key("grid.d", "1", "spatial dimension; the solver diagnostics need 1"),
    key("model.beta", "1", "inverse temperature"),
    key("model.kernel", "dirac", "covariance kernel: dirac, bump or box"),
    key("model.phi_width", "1", "support diameter of the mollifier for bump and box"),
    key("init.q0", "gaussian:4", "initial density: bump:<w>, delta, gaussian:<var>, plateau:<h>[:<edge>]"),
    key("time.dt", "1e-3", "fixed step, or the smallest step when adaptive"),
    key("time.adaptive", "true", "keep dt·β²·sup(R⋆g) at the reaction budget"),
    key("time.dt_max", "1e9", "largest adaptive step"),
    key("time.cadence", "1", "record a diagnostic row every this many steps (0 = only at requested times)"),
    key("rd.budget", "0.1", "reaction stability budget for dt·β²·sup(R⋆g)"),
    key("rd.tail_cutoff", "1e-14", "relative level below which tail values are zeroed (0 disables)"),
    key("rd.heat", "continuum", "heat symbol: continuum or lattice"),
];

pub(super) fn run_keys() -> Vec<KeySpec> {
    let mut k = SOLVER_KEYS.to_vec();
    k.extend([
        key("grid.L", "256", "half-width of the periodic box"),
        key("grid.N", "8192", "points per axis (power of two)"),
        key("time.T", "100", "final time"),
        key("time.snapshots", "", "comma-separated times at which snapshot files are written"),
        key("rescale.beta", "0.5", "second inverse temperature for the rescaling check (0 disables)"),
    ]);
    k
}

pub(super) fn scaling_keys() -> Vec<KeySpec> {
    let mut k: Vec<KeySpec> = SOLVER_KEYS.iter().filter(|k| k.key != "init.q0").copied().collect();
    k.extend([
        key("init.q0", "gaussian:9", "initial density: bump:<w>, delta, gaussian:<var>, plateau:<h>[:<edge>]"),
        key("grid.L", "2.2e4", "half-width of the periodic box"),
        key("grid.N", "65536", "points per axis (power of two)"),
        key("time.T", "1e5", "final time"),
        key("scaling.per_decade", "20", "log-spaced diagnostic times per decade"),
        key("scaling.fit_lo", "1e2", "start of the fit window"),
        key("scaling.fit_hi", "1e5", "end of the fit window"),
        key("scaling.p", "1,2,4", "moment orders to fit (subset of 1,2,4)"),
    ]);
    k
}

/// Absolute sup-difference allowed between rescaled runs.
const RESCALE_TOLERANCE: f64 = 5e-4;
const MASS_TOLERANCE: f64 = 1e-10;
const ORDER_TOLERANCE: f64 = 1e-12;

fn solver_config(c: &Config) -> Result<(RdConfig, DensityField)> {
    let grid = grid(c)?;
    if grid.dim() != 1 {
        return Err(CliError::Config("the reaction-diffusion diagnostics need grid.d = 1".into()));
    }
    let kernel = kernel(c, &grid)?;
    let mut cfg = RdConfig::new(c.f64("model.beta")?, kernel, c.f64("time.dt")?, c.f64("time.T")?);
    if c.bool("time.adaptive")? {
        cfg.adaptive = Some(AdaptiveStep { dt_max: c.f64("time.dt_max")? });
    }
    cfg.cadence = c.usize("time.cadence")?;
    cfg.budget = c.f64("rd.budget")?;
    cfg.tail_cutoff = c.f64("rd.tail_cutoff")?;
    cfg.heat = match c.string("rd.heat")?.as_str() {
        "continuum" => HeatSymbol::Continuum,
        "lattice" => HeatSymbol::Lattice,
        other => return Err(CliError::Config(format!("rd.heat = {other}: expected continuum or lattice"))),
    };
    let q0 = initial(c)?.build(&grid)?;
    Ok((cfg, q0))
}

fn solve(cfg: &RdConfig, q0: &DensityField) -> Result<RdRun> {
    rd::run(cfg, q0).map_err(|failure| CliError::Aborted {
        failure: Box::new(failure),
        beta: cfg.beta,
        kernel: cfg.kernel.id(),
    })
}

/// Row-wise conservation, ordering, dissipation and moment-bound checks.
fn series_checks(series: &DiagnosticSeries, out: &mut Outcome) -> Result<Vec<InequalityReport>> {
    let rows = &series.rows;
    let mut reports = Vec::new();
    let mut mass_err: f64 = 0.0;
    for (k, r) in rows.iter().enumerate() {
        mass_err = mass_err.max((r.mass - 1.0).abs());
        reports.push(energy_below_max(r.t, r.m, r.e));
        if k > 0 {
            reports.push(InequalityReport::new("energy_nonincreasing", r.t, rows[k - 1].e, r.e, ORDER_TOLERANCE));
        }
        if r.d > 0.0 {
            reports.push(dissipation_report(r.t, r.m, r.e, r.d)?);
        }
        for (p, m) in [(1.0, r.m1), (2.0, r.m2), (4.0, r.m4)] {
            reports.push(moment_lower_bound_report(r.t, r.m, p, m, 1)?);
        }
    }
    let tally = |name: &str| {
        let sel: Vec<&InequalityReport> = reports.iter().filter(|r| r.name.starts_with(name)).collect();
        let failed = sel.iter().filter(|r| !r.pass).count();
        let worst = sel.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        (failed, sel.len(), worst)
    };
    out.check(
        "mass_conservation",
        mass_err <= MASS_TOLERANCE,
        format!("max |mass-1| = {mass_err:.3e} over {} rows", rows.len()),
    );
    for (name, label) in [
        ("energy_below_max", "energy_below_max"),
        ("energy_nonincreasing", "energy_nonincreasing"),
        ("dissipation", "dissipation"),
        ("moment_lower_bound", "moment_lower_bound"),
    ] {
        let (failed, total, worst) = tally(name);
        out.check(
            label,
            failed == 0 && total > 0,
            format!("{failed} of {total} rows fail; smallest margin {worst:.3e}"),
        );
    }
    let clamped = rows.last().map_or(0.0, |r| r.clamped_mass);
    out.metric("max_mass_error", mass_err);
    out.metric("clamped_mass", clamped);
    out.metric("rows", rows.len() as f64);
    Ok(reports)
}

fn inequality_csv(reports: &[InequalityReport]) -> String {
    let mut s = format!("{}\n", InequalityReport::csv_header());
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// The same initial data with lengths multiplied by `s`.
fn scale_initial(init: InitialData, s: f64) -> InitialData {
    match init {
        InitialData::Bump { width } => InitialData::Bump { width: width * s },
        InitialData::DeltaBump => InitialData::DeltaBump,
        InitialData::Gaussian { variance } => InitialData::Gaussian { variance: variance * s * s },
        InitialData::Plateau { height, edge } => InitialData::Plateau { height: height / s, edge: edge * s },
    }
}

struct RescaleRow {
    label: &'static str,
    points: usize,
    t: f64,
    sup_diff: f64,
}

/// Runs the equation at `beta2` on the box stretched by `β²/β₂²` (same
/// and doubled point counts), maps both to unit `β`, and compares with
/// the base run on the base grid points.
fn rescale_study(c: &Config, base: &RdConfig, base_run: &RdRun, beta2: f64) -> Result<Vec<RescaleRow>> {
    let beta = base.beta;
    if !base.kernel.is_dirac() {
        return Err(CliError::Config(
            "the rescaling check supports the dirac kernel only; set rescale.beta = 0".into(),
        ));
    }
    let s = (beta / beta2).powi(2);
    let init = scale_initial(initial(c)?, s);
    let configs = [("matched", 1usize), ("refined", 2usize)]
        .into_iter()
        .map(|(label, refine)| {
            let g = Grid::new(1, base.grid.half_width() * s, base.grid.points_per_axis() * refine)?;
            let mut cfg = base.clone();
            cfg.beta = beta2;
            cfg.kernel = polylab::CovarianceKernel::dirac(&g)?;
            cfg.grid = g;
            cfg.dt = base.dt * s * s;
            cfg.t_final = base.t_final * s * s;
            cfg.adaptive = base.adaptive.map(|a| AdaptiveStep { dt_max: a.dt_max * s * s });
            cfg.snapshot_times = base.snapshot_times.iter().map(|t| t * s * s).collect();
            cfg.diagnostic_times.clear();
            cfg.cadence = 0;
            let q0 = init.build(&g)?;
            Ok((label, refine, cfg, q0))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<Result<RdRun>> = if threads(c)? == Some(1) {
        configs.iter().map(|(_, _, cfg, q0)| solve(cfg, q0)).collect()
    } else {
        std::thread::scope(|sc| {
            let handles: Vec<_> = configs.iter().map(|(_, _, cfg, q0)| sc.spawn(move || solve(cfg, q0))).collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        })
    };
    let unit = |g: &DensityField, b: f64| rd::rescale_to_unit_beta(g, b);
    let mut rows = Vec::new();
    for ((label, refine, _, _), run) in configs.iter().zip(runs) {
        let run = run?;
        for (a, b) in base_run.snapshots.iter().zip(&run.snapshots) {
            let ua = unit(a, beta)?;
            let ub = unit(b, beta2)?;
            let rel = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
            if !rel(ua.time(), ub.time()) || !rel(ua.grid().half_width(), ub.grid().half_width()) {
                return Err(CliError::Config("rescaled runs do not land on matching times and boxes".into()));
            }
            let sup =
                ua.values().iter().enumerate().map(|(i, v)| (v - ub.values()[i * refine]).abs()).fold(0.0, f64::max);
            rows.push(RescaleRow {
                label,
                points: run.final_state.grid().points_per_axis(),
                t: ua.time(),
                sup_diff: sup,
            });
        }
    }
    Ok(rows)
}

pub(super) fn rd_run(c: &Config) -> Result<Outcome> {
    let (mut cfg, q0) = solver_config(c)?;
    let mut snaps = c.f64_list("time.snapshots")?;
    let beta2 = c.f64("rescale.beta")?;
    if beta2 < 0.0 {
        return Err(CliError::Config("rescale.beta must be nonnegative".into()));
    }
    let rescale = beta2 > 0.0 && cfg.beta > 0.0;
    let t = cfg.t_final;
    let compare_times = [0.25 * t, 0.5 * t, t];
    if rescale {
        snaps.extend_from_slice(&compare_times);
    }
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    cfg.snapshot_times = snaps;
    let run = solve(&cfg, &q0)?;
    let mut out = Outcome { warnings: run.warnings.clone(), ..Default::default() };
    out.file("diagnostics.csv", run.series.to_csv());
    let reports = series_checks(&run.series, &mut out)?;
    out.file("inequalities.csv", inequality_csv(&reports));
    let requested = c.f64_list("time.snapshots")?;
    for s in run.snapshots.iter().filter(|s| requested.contains(&s.time())) {
        out.file(&format!("snapshot_t{}.txt", s.time()), write_snapshot(s, cfg.beta, &cfg.kernel.id()));
    }
    out.metric("steps", run.steps as f64);
    out.metric("cut_mass", run.cut_mass);
    if beta2 > 0.0 && !rescale {
        out.warnings.push("rescaling check skipped at model.beta = 0".into());
    }
    if rescale {
        let rows = rescale_study(c, &cfg, &run, beta2)?;
        let mut csv = String::from("grid,N,t_unit,sup_diff\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{}\n", r.label, r.points, num(r.t), num(r.sup_diff)));
        }
        out.file("rescale.csv", csv);
        for label in ["matched", "refined"] {
            let worst = rows.iter().filter(|r| r.label == label).map(|r| r.sup_diff).fold(0.0, f64::max);
            out.metric(&format!("rescale_{label}_sup_diff"), worst);
            out.check(
                format!("rescale_{label}"),
                worst <= RESCALE_TOLERANCE,
                format!("sup |ḡ(β={}) - g(β={})| = {worst:.3e}", beta2, cfg.beta),
            );
        }
    }
    Ok(out)
}

/// Log-spaced times `10^(k/per_decade)` in `[1e-2, t_max]`.
fn log_times(per_decade: usize, t_max: f64) -> Vec<f64> {
    let pd = per_decade as f64;
    let top = (t_max.log10() * pd).floor() as i64;
    (-2 * per_decade as i64..=top).map(|k| 10f64.powf(k as f64 / pd)).filter(|&t| t <= t_max).collect()
}

pub(super) fn rd_scaling(c: &Config) -> Result<Outcome> {
    let (mut cfg, q0) = solver_config(c)?;
    let t_max = cfg.t_final;
    let per_decade = c.usize("scaling.per_decade")?;
    if per_decade == 0 {
        return Err(CliError::Config("scaling.per_decade must be positive".into()));
    }
    let orders = c.f64_list("scaling.p")?;
    if orders.is_empty() || orders.iter().any(|p| ![1.0, 2.0, 4.0].contains(p)) {
        return Err(CliError::Config("scaling.p must list orders among 1, 2, 4".into()));
    }
    let window = (c.f64("scaling.fit_lo")?, c.f64("scaling.fit_hi")?);
    let log_t = log_times(per_decade, t_max);
    cfg.diagnostic_times = log_t.clone();
    cfg.snapshot_times = (0..=12).map(|k| 10f64.powi(k)).filter(|&t| t <= t_max).collect();
    let run = solve(&cfg, &q0)?;
    let mut out = Outcome { warnings: run.warnings.clone(), ..Default::default() };
    out.file("diagnostics.csv", run.series.to_csv());
    let mut reports = series_checks(&run.series, &mut out)?;

    let logged: Vec<_> = run.series.rows.iter().filter(|r| log_t.contains(&r.t)).copied().collect();
    let mut fit_csv = String::from("p,slope,intercept,stderr,expected,used\n");
    for &p in &orders {
        let col: Vec<(f64, f64)> = logged
            .iter()
            .map(|r| {
                (
                    r.t,
                    if p == 1.0 {
                        r.m1
                    } else if p == 2.0 {
                        r.m2
                    } else {
                        r.m4
                    },
                )
            })
            .collect();
        let fit = fit_exponent(&col, window)?;
        let expected = 2.0 * p / 3.0;
        fit_csv.push_str(&format!(
            "{p},{},{},{},{},{}\n",
            num(fit.slope),
            num(fit.intercept),
            num(fit.stderr),
            num(expected),
            fit.used
        ));
        out.metric(&format!("slope_m{p}"), fit.slope);
        out.metric(&format!("slope_stderr_m{p}"), fit.stderr);
        out.check(
            format!("slope_m{p}"),
            (fit.slope - expected).abs() <= 0.05,
            format!("slope {:.4} vs {expected:.4} ± 0.05 over {} rows", fit.slope, fit.used),
        );
    }
    out.file("fit.csv", fit_csv);

    let decay: Vec<(f64, f64)> =
        run.series.rows.iter().filter(|r| r.t >= 1.0).map(|r| (r.t, r.t.powf(2.0 / 3.0) * r.m)).collect();
    let sup = decay.iter().map(|d| d.1).fold(0.0, f64::max);
    let last: Vec<f64> = decay.iter().filter(|d| d.0 >= t_max / 10.0).map(|d| d.1).collect();
    let lmax = last.iter().copied().fold(0.0, f64::max);
    let lmin = last.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = if lmax > 0.0 { (lmax - lmin) / lmax } else { f64::NAN };
    out.metric("sup_t23_m", sup);
    out.metric("last_decade_variation", variation);
    out.check(
        "max_decay",
        !decay.is_empty() && sup <= MAX_DECAY_ENVELOPE,
        format!("sup t^(2/3) M = {sup:.4} vs {MAX_DECAY_ENVELOPE}"),
    );
    out.check("decay_stabilizes", variation < 0.2, format!("last-decade variation {:.2}%", 100.0 * variation));
    let mut decay_csv = String::from("t,t23M\n");
    for (t, v) in decay.iter().filter(|d| log_t.contains(&d.0)) {
        decay_csv.push_str(&format!("{},{}\n", num(*t), num(*v)));
    }
    out.file("decay.csv", decay_csv);

    if run.snapshots.iter().any(|s| s.time() == 1.0) {
        let sup_reports = supersolution_check(&run.snapshots, sup)?;
        let failed = sup_reports.iter().filter(|r| !r.pass).count();
        out.check(
            "supersolution",
            failed == 0,
            format!("{failed} of {} snapshots exceed the bound", sup_reports.len()),
        );
        reports.extend(sup_reports);
    }
    out.file("inequalities.csv", inequality_csv(&reports));

    let mut prof = String::from("t,y,value\n");
    for s in run.snapshots.iter().filter(|s| s.time() >= 1.0) {
        let pts: Vec<(f64, f64)> = rescaled_profile(s)?.into_iter().filter(|p| p.0.abs() <= 5.0).collect();
        let stride = pts.len().div_ceil(400).max(1);
        for (y, v) in pts.iter().step_by(stride) {
            prof.push_str(&format!("{},{},{}\n", num(s.time()), num(*y), num(*v)));
        }
    }
    out.file("profiles.csv", prof);
    out.metric("steps", run.steps as f64);
    out.metric("cut_mass", run.cut_mass);
    Ok(out)
}
