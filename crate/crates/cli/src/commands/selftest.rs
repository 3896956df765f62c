//! Quick battery of exact or near-exact properties.

use polylab::closure::{closure_solve, factorization_defect};
use polylab::diagnostics::{fit_exponent, med, minimizer_lower_bound, moment};
use polylab::hierarchy::{self as hier, TestFunction};
use polylab::rd::{self, reaction_substep, RdConfig};
use polylab::she::{estimate_qn, mollification_study, SheConfig, SheRunner};
use polylab::snapshot::{read_snapshot, write_snapshot};
use polylab::spectral::Workspace;
use polylab::{
    heat_kernel, heat_propagate, make_kernel, CovarianceKernel, DensityField, Grid, InitialData, MollifierSpec,
};

use super::{num, threads, Outcome};
use crate::config::{key, Config, KeySpec};
use crate::error::Result;

pub(super) fn keys() -> Vec<KeySpec> {
    vec![key("mc.seed", "1", "master seed for the small ensembles")]
}

type Item = polylab::Result<(bool, f64)>;
type Probe<'a> = Box<dyn Fn() -> Item + 'a>;

fn close(a: f64, b: f64, tol: f64) -> (bool, f64) {
    ((a - b).abs() <= tol, a)
}

fn line(l: f64, n: usize) -> polylab::Result<Grid> {
    Grid::new(1, l, n)
}

fn gaussian(grid: Grid, t: f64) -> polylab::Result<DensityField> {
    DensityField::from_fn(grid, t, |x| heat_kernel(t, x).unwrap_or(0.0))
}

fn she(
    kernel: CovarianceKernel,
    beta: f64,
    t: f64,
    reals: usize,
    seed: u64,
    init: InitialData,
) -> polylab::Result<SheRunner> {
    let dt = 0.5 * kernel.grid().spacing().powi(2);
    let mut cfg = SheConfig::new(kernel, beta, dt, t, reals, seed);
    cfg.initial = init;
    SheRunner::new(&cfg)
}

pub(super) fn selftest(c: &Config) -> Result<Outcome> {
    let seed = c.u64("mc.seed")?;
    let threads = threads(c)?;
    let items: Vec<(&str, Probe)> = vec![
        (
            "logistic_zero_level",
            Box::new(|| {
                let g = DensityField::new(line(8.0, 16)?, vec![1.0; 16], 0.0)?;
                Ok(close(reaction_substep(&g, 0.0, 1.0, 0.5)?.values()[3], 1.0 / 1.5, 1e-15))
            }),
        ),
        (
            "logistic_fixed_point",
            Box::new(|| {
                let g = DensityField::new(line(8.0, 16)?, vec![0.7; 16], 0.0)?;
                Ok(close(reaction_substep(&g, 0.7, 1.0, 0.3)?.values()[5], 0.7, 1e-15))
            }),
        ),
        (
            "beta0_step_is_heat",
            Box::new(|| {
                let q0 = InitialData::Bump { width: 2.0 }.build(&line(16.0, 256)?)?;
                let cfg = RdConfig::new(0.0, CovarianceKernel::dirac(q0.grid())?, 1.0, 1.0);
                let a = rd::step(&q0, &cfg)?;
                let b = heat_propagate(&q0, 1.0)?;
                let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                Ok((diff <= 1e-8, diff))
            }),
        ),
        (
            "step_conserves_mass",
            Box::new(|| {
                let q0 = InitialData::Gaussian { variance: 1.0 }.build(&line(16.0, 256)?)?;
                let g = *q0.grid();
                let mut worst: f64 = 0.0;
                for k in [CovarianceKernel::dirac(&g)?, make_kernel(MollifierSpec::smooth(1.0), &g)?] {
                    let cfg = RdConfig::new(1.0, k, 0.05, 0.05);
                    worst = worst.max((rd::step(&q0, &cfg)?.mass() - 1.0).abs());
                }
                Ok((worst <= 1e-10, worst))
            }),
        ),
        (
            "gaussian_energy",
            Box::new(|| {
                let m = med(&gaussian(line(20.0, 1024)?, 1.0)?);
                Ok(close(m.e, 0.5 / std::f64::consts::PI.sqrt(), 1e-12))
            }),
        ),
        (
            "gaussian_second_moment",
            Box::new(|| Ok(close(moment(&gaussian(line(20.0, 1024)?, 1.0)?, 2.0)?.value, 1.0, 1e-10))),
        ),
        (
            "minimizer_bound_uniform",
            Box::new(|| {
                // the uniform density 1/2 on [-1, 1] has second moment 1/3
                Ok(close(minimizer_lower_bound(0.5, 2.0, 1)?, 1.0 / 3.0, 1e-15))
            }),
        ),
        (
            "fit_exact_power",
            Box::new(|| {
                let rows: Vec<(f64, f64)> =
                    (0..20).map(|k| 10f64.powf(k as f64 / 5.0)).map(|t| (t, t.powf(4.0 / 3.0))).collect();
                Ok(close(fit_exponent(&rows, (1.0, 1e4))?.slope, 4.0 / 3.0, 1e-12))
            }),
        ),
        (
            "dirac_needs_one_dimension",
            Box::new(|| Ok((CovarianceKernel::dirac(&Grid::new(2, 4.0, 16)?).is_err(), 0.0))),
        ),
        (
            "she_beta0_products_exact",
            Box::new(move || {
                let r = she(CovarianceKernel::dirac(&line(4.0, 32)?)?, 0.0, 0.5, 4, seed, InitialData::DeltaBump)?;
                let o = r.config().grid.origin_index();
                let rep = estimate_qn(&r, &[vec![o, o + 2]], 0.5)?;
                let mean = r.mean_field(0.5)?;
                let want = mean.values()[o] * mean.values()[o + 2] / mean.mass().powi(2);
                let e = rep.estimates[0];
                Ok((e.stderr == 0.0 && (e.mean - want).abs() <= 1e-12 * want, e.mean - want))
            }),
        ),
        (
            "endpoint_density_unit_mass",
            Box::new(move || {
                let r = she(CovarianceKernel::dirac(&line(4.0, 32)?)?, 1.0, 0.5, 2, seed, InitialData::DeltaBump)?;
                let mut z = r.realization(0);
                z.advance_to(0.5)?;
                Ok(close(z.density()?.mass(), 1.0, 1e-14))
            }),
        ),
        (
            "coupling_k0_vanishes",
            Box::new(|| {
                let g = line(4.0, 64)?;
                let q = InitialData::Gaussian { variance: 1.0 }.build(&g)?;
                let f = TestFunction::gaussian(1.0).samples(&g);
                let v = hier::fkr_value(&f, 0, q.values(), &CovarianceKernel::dirac(&g)?, &mut Workspace::new())?;
                Ok((v == 0.0, v))
            }),
        ),
        (
            "constant_ledger_exact",
            Box::new(move || {
                let r = she(CovarianceKernel::dirac(&line(4.0, 32)?)?, 0.5, 0.5, 4, seed, InitialData::DeltaBump)?;
                let l = hier::weak_residual(&r, 1, &TestFunction::Constant, 0.0)?;
                Ok((l.residual.mean == 0.0 && l.residual.stderr == 0.0, l.residual.mean))
            }),
        ),
        (
            "t_operator_integrates_to_zero",
            Box::new(|| {
                let g = line(8.0, 128)?;
                let q = InitialData::Gaussian { variance: 1.0 }.build(&g)?;
                let k = make_kernel(MollifierSpec::smooth(1.0), &g)?;
                let s: f64 = hier::t_operator(q.values(), &k).iter().sum::<f64>() * g.spacing();
                Ok((s.abs() <= 1e-14, s))
            }),
        ),
        (
            "backward_heat_terminal",
            Box::new(|| {
                let h = TestFunction::gaussian(0.7);
                let v = hier::backward_heat_f(&h, 0.5, 4.0, &[0.9])?;
                Ok(close(v, h.eval(&[0.45]), 1e-14))
            }),
        ),
        (
            "backward_heat_square",
            Box::new(|| {
                let v = hier::backward_heat_f(&TestFunction::SquaredNorm, 0.5, 1.0, &[1.0, 2.0, 0.5])?;
                Ok(close(v, 0.25 * 5.25 + 0.75 * 3.0, 1e-13))
            }),
        ),
        (
            "closure_is_the_solver",
            Box::new(|| {
                let q0 = InitialData::Gaussian { variance: 1.0 }.build(&line(16.0, 256)?)?;
                let cfg = RdConfig::new(1.0, CovarianceKernel::dirac(q0.grid())?, 0.05, 1.0);
                let a = closure_solve(&cfg, &q0).map_err(|f| f.error)?;
                let b = rd::run(&cfg, &q0).map_err(|f| f.error)?;
                let same =
                    a.final_state.values().iter().zip(b.final_state.values()).all(|(x, y)| x.to_bits() == y.to_bits());
                Ok((same && a.series == b.series, 0.0))
            }),
        ),
        (
            "defect_vanishes_at_beta0",
            Box::new(move || {
                let g = line(4.0, 32)?;
                let r = she(
                    make_kernel(MollifierSpec::smooth(1.0), &g)?,
                    0.0,
                    0.25,
                    4,
                    seed,
                    InitialData::Gaussian { variance: 0.25 },
                )?;
                let o = g.origin_index();
                let d = factorization_defect(&r, &[o - 2, o, o + 2])?;
                Ok((d.defect == 0.0, d.defect))
            }),
        ),
        (
            "snapshot_roundtrip",
            Box::new(|| {
                let q = InitialData::Gaussian { variance: 1.0 }.build(&line(4.0, 32)?)?;
                let (_, back) = read_snapshot(&write_snapshot(&q, 1.0, "dirac"))?;
                Ok((back.values() == q.values(), 0.0))
            }),
        ),
        (
            "error_form_beta0",
            Box::new(move || {
                let g = line(16.0, 128)?;
                let r = she(make_kernel(MollifierSpec::smooth(1.0), &g)?, 0.0, 4.0, 2, seed, InitialData::DeltaBump)?;
                let e = hier::error_form(&r, &TestFunction::SquaredNorm, 0.5, 1e-10)?;
                let m = e.lhs.mean.abs().max(e.rhs.mean.abs());
                Ok((m <= 1e-10, m))
            }),
        ),
        (
            "generator_beta0",
            Box::new(move || {
                let g = line(16.0, 128)?;
                let mut cfg = SheConfig::new(CovarianceKernel::dirac(&g)?, 0.0, 0.005, 0.02, 2, seed);
                cfg.initial = InitialData::Gaussian { variance: 1.0 };
                let t = hier::generator_check(&cfg, &TestFunction::SquaredNorm, &[0.02, 0.01], 4)?;
                let dev = t.rows.iter().map(|r| (r.slope.mean - t.diffusion).abs()).fold(0.0, f64::max);
                Ok((dev <= 1e-8, dev))
            }),
        ),
        (
            "mollification_beta0",
            Box::new(move || {
                let g = line(4.0, 64)?;
                let mut cfg =
                    SheConfig::new(make_kernel(MollifierSpec::smooth(1.0), &g)?, 0.0, 1.0 / 512.0, 0.25, 4, seed);
                cfg.initial = InitialData::Gaussian { variance: 0.25 };
                let t = mollification_study(&cfg, MollifierSpec::smooth(1.0), [1.0, 0.5, 0.25], g.origin_index())?;
                let m = t.differences.iter().map(|d| d.mean).fold(0.0, f64::max);
                Ok((m == 0.0, m))
            }),
        ),
        (
            "thread_count_invariance",
            Box::new(move || {
                let g = line(4.0, 32)?;
                let mut cfg = SheConfig::new(CovarianceKernel::dirac(&g)?, 0.7, 1.0 / 128.0, 0.25, 16, seed);
                let o = g.origin_index();
                cfg.threads = Some(1);
                let a = estimate_qn(&SheRunner::new(&cfg)?, &[vec![o], vec![o, o + 1]], 0.25)?;
                cfg.threads = threads.or(Some(2));
                let b = estimate_qn(&SheRunner::new(&cfg)?, &[vec![o], vec![o, o + 1]], 0.25)?;
                let same = a.estimates.iter().zip(&b.estimates).all(|(x, y)| x.mean.to_bits() == y.mean.to_bits());
                Ok((same, 0.0))
            }),
        ),
    ];
    let mut out = Outcome::default();
    let mut csv = String::from("name,pass,value\n");
    for (name, f) in items {
        let (pass, value, detail) = match f() {
            Ok((p, v)) => (p, v, format!("value {v:e}")),
            Err(e) => (false, f64::NAN, e.to_string()),
        };
        csv.push_str(&format!("{name},{pass},{}\n", num(value)));
        out.check(name, pass, detail);
    }
    out.file("selftest.csv", csv);
    Ok(out)
}
