//! Measurements of the factorized closure `Q_2 ≈ Q_1 ⊗ Q_1`, whose closed
//! equation is the nonlocal reaction-diffusion equation.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, DensityField};
use crate::mc::McEstimate;
use crate::rd::{self, RdConfig, RdFailure, RdRun};
use crate::she::{Discards, SheRunner};

/// Solves the closed equation; identical to [`rd::run`].
pub fn closure_solve(cfg: &RdConfig, q0: &DensityField) -> std::result::Result<RdRun, RdFailure> {
    rd::run(cfg, q0)
}

/// Largest `|Q_2(x, y) − Q_1(x)Q_1(y)|` over probe pairs.
#[derive(Debug, Clone)]
pub struct DefectReport {
    pub t: f64,
    pub beta: f64,
    pub defect: f64,
    pub scale: f64,
    pub stderr: f64,
    /// Pair attaining the defect, as flat indices.
    pub pair: (usize, usize),
    pub inconclusive: bool,
    pub discards: Discards,
}

impl DefectReport {
    pub fn csv_header() -> &'static str {
        "T,beta,defect,scale,stderr"
    }

    pub fn csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", self.t, self.beta, self.defect, self.scale, self.stderr)
    }

    pub fn ratio(&self) -> f64 {
        self.defect / self.scale
    }
}

/// Sample covariance of `q(x)` and `q(y)` (the factorization defect) with
/// its delta-method standard error. Samples are shifted by the first
/// realization, so identical realizations give exactly zero.
fn covariance(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (a0, b0) = (a[0], b[0]);
    let da: Vec<f64> = a.iter().map(|v| v - a0).collect();
    let db: Vec<f64> = b.iter().map(|v| v - b0).collect();
    let ma = pairwise_sum(&da) / n;
    let mb = pairwise_sum(&db) / n;
    let prod: Vec<f64> = da.iter().zip(&db).map(|(x, y)| x * y).collect();
    let c = pairwise_sum(&prod) / n - ma * mb;
    let infl: Vec<f64> = da.iter().zip(&db).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let se = McEstimate::from_samples(&infl).map_or(0.0, |e| e.stderr);
    (c, se)
}

/// Factorization defect at the runner's final time over all pairs of
/// `probes` (flat indices, `x ≤ y`).
pub fn factorization_defect(runner: &SheRunner, probes: &[usize]) -> Result<DefectReport> {
    let cfg = runner.config();
    if cfg.grid.dim() != 1 {
        return Err(Error::Inapplicable("the factorization defect is measured in d = 1".into()));
    }
    if probes.is_empty() || probes.iter().any(|&p| p >= cfg.grid.len()) {
        return Err(Error::Domain("probes must be nonempty grid indices".into()));
    }
    let t = cfg.t_final;
    let (samples, discards) = runner.run(|r| {
        r.advance_to(t)?;
        let q = r.density()?;
        Ok(probes.iter().map(|&p| q.values()[p]).collect::<Vec<f64>>())
    })?;
    if samples.len() < 2 {
        return Err(Error::Invariant("fewer than two valid realizations".into()));
    }
    let cols: Vec<Vec<f64>> = (0..probes.len()).map(|j| samples.iter().map(|s| s[j]).collect()).collect();
    let means: Vec<f64> = cols.iter().map(|c| pairwise_sum(c) / c.len() as f64).collect();
    let mut best = (0.0f64, 0.0f64, (probes[0], probes[0]));
    let mut scale = 0.0f64;
    for i in 0..probes.len() {
        for j in i..probes.len() {
            let (c, se) = covariance(&cols[i], &cols[j]);
            scale = scale.max(means[i] * means[j]);
            if c.abs() > best.0 || (i == 0 && j == 0) {
                best = (c.abs(), se, (probes[i], probes[j]));
            }
        }
    }
    Ok(DefectReport {
        t,
        beta: cfg.beta,
        defect: best.0,
        scale,
        stderr: best.1,
        pair: best.2,
        inconclusive: best.1 > best.0,
        discards,
    })
}

/// `‖Q_1^{closure}(T) − Q̂_1(T)‖₁` with a band from per-cell standard errors.
#[derive(Debug, Clone)]
pub struct ClosureComparison {
    pub t: f64,
    pub l1: f64,
    pub band: f64,
    pub discards: Discards,
}

/// Compares the closed equation, integrated with step `dt` on the
/// runner's grid and kernel, with the Monte Carlo mean density.
pub fn closure_vs_mc(runner: &SheRunner, dt: f64) -> Result<ClosureComparison> {
    let cfg = runner.config();
    if cfg.grid.dim() != 1 {
        return Err(Error::Inapplicable("the closed equation is solved in d = 1".into()));
    }
    let t = cfg.t_final;
    let mut rc = RdConfig::new(cfg.beta, cfg.kernel.clone(), dt, t);
    rc.cadence = 0;
    let closed = closure_solve(&rc, runner.q0()).map_err(|f| f.error)?;
    let (fields, discards) = runner.run(|r| {
        r.advance_to(t)?;
        Ok(r.density()?.into_values())
    })?;
    if fields.len() < 2 {
        return Err(Error::Invariant("fewer than two valid realizations".into()));
    }
    let vol = cfg.grid.cell_volume();
    let mut l1 = Vec::with_capacity(cfg.grid.len());
    let mut band = Vec::with_capacity(cfg.grid.len());
    for (i, c) in closed.final_state.values().iter().enumerate() {
        let col: Vec<f64> = fields.iter().map(|f| f[i]).collect();
        let e = McEstimate::from_samples(&col)?;
        l1.push((c - e.mean).abs() * vol);
        band.push(e.stderr * vol);
    }
    Ok(ClosureComparison { t, l1: pairwise_sum(&l1), band: pairwise_sum(&band), discards })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::init::InitialData;
    use crate::kernel::{make_kernel, MollifierSpec};
    use crate::she::SheConfig;

    #[test]
    fn closure_is_the_reaction_diffusion_run() {
        let g = Grid::new(1, 10.0, 128).unwrap();
        let k = make_kernel(MollifierSpec::smooth(1.0), &g).unwrap();
        let q0 = InitialData::Gaussian { variance: 0.5 }.build(&g).unwrap();
        let cfg = RdConfig::new(0.8, k, 0.01, 0.5);
        let a = closure_solve(&cfg, &q0).unwrap();
        let b = rd::run(&cfg, &q0).unwrap();
        assert_eq!(a.final_state.values(), b.final_state.values());
        assert_eq!(a.series.to_csv(), b.series.to_csv());
    }

    #[test]
    fn covariance_is_symmetric_and_vanishes_on_constant_samples() {
        let a = [0.3, 0.5, 0.1, 0.7, 0.2];
        let b = [1.0, 0.4, 0.9, 0.6, 0.8];
        assert_eq!(covariance(&a, &b), covariance(&b, &a));
        let c = [0.37; 5];
        assert_eq!(covariance(&c, &c), (0.0, 0.0));
    }

    #[test]
    fn no_noise_means_no_defect() {
        let g = Grid::new(1, 6.0, 64).unwrap();
        let k = make_kernel(MollifierSpec::smooth(1.0), &g).unwrap();
        let dt = 0.5 * g.spacing().powi(2);
        let cfg = SheConfig::new(k, 0.0, dt, 32.0 * dt, 8, 2);
        let runner = SheRunner::new(&cfg).unwrap();
        let probes = [30, 32, 34];
        let rep = factorization_defect(&runner, &probes).unwrap();
        assert_eq!(rep.defect, 0.0);
        assert!(!rep.inconclusive);
        assert!(rep.scale > 0.0);
    }
}
