//! Stochastic heat equation `∂_t u = ½Δu + β u ξ_φ` with multiplicative
//! noise, and the endpoint density `q = u / ∫u`.
//!
//! Each step multiplies by the lognormal factor
//! `exp(β ΔW − ½ β² R(0) dt)` and then applies the exact lattice heat
//! semigroup, so `u` stays positive and `E[u]` follows the lattice heat
//! flow exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, DensityField};
use crate::grid::Grid;
use crate::heat::HeatPropagator;
use crate::init::InitialData;
use crate::kernel::{make_kernel, CovarianceKernel, MollifierSpec};
use crate::mc::{ensemble, McEstimate};
use crate::rng::RngPlan;
use crate::spectral::{Spectral, Workspace};

/// Total mass below which a realization is discarded.
pub const UNDERFLOW_FLOOR: f64 = 1e-280;

/// Estimates from fewer valid realizations are flagged.
pub const LOW_CONFIDENCE: usize = 100;

#[derive(Debug, Clone)]
pub struct SheConfig {
    pub grid: Grid,
    pub beta: f64,
    pub kernel: CovarianceKernel,
    pub dt: f64,
    pub t_final: f64,
    pub realizations: usize,
    pub rng: RngPlan,
    pub initial: InitialData,
    pub threads: Option<usize>,
}

impl SheConfig {
    pub fn new(kernel: CovarianceKernel, beta: f64, dt: f64, t_final: f64, realizations: usize, seed: u64) -> Self {
        Self {
            grid: *kernel.grid(),
            beta,
            kernel,
            dt,
            t_final,
            realizations,
            rng: RngPlan::new(seed),
            initial: InitialData::DeltaBump,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if *self.kernel.grid() != self.grid {
            return Err(Error::Config("kernel was built on a different grid".into()));
        }
        if self.kernel.is_dirac() && self.grid.dim() != 1 {
            return Err(Error::Config("the Dirac kernel is restricted to d = 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        let limit = 0.5 * self.grid.spacing().powi(2);
        if !(self.dt > 0.0 && self.dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::Config(format!("dt = {} must lie in (0, Δx²/2 = {limit}]", self.dt)));
        }
        if self.realizations < 2 {
            return Err(Error::Config("at least 2 realizations are required".into()));
        }
        self.steps_to(self.t_final)?;
        Ok(())
    }

    /// Number of steps to reach `t`, which must be a multiple of `dt`.
    pub fn steps_to(&self, t: f64) -> Result<usize> {
        let s = t / self.dt;
        let r = s.round();
        if !(t >= 0.0) || (s - r).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::Config(format!("time {t} is not a multiple of dt = {}", self.dt)));
        }
        Ok(r as usize)
    }
}

/// Failed realizations, by index and reason.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Discards(pub Vec<(u64, String)>);

impl Discards {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shared, immutable state for all realizations of one configuration.
#[derive(Debug)]
pub struct SheRunner {
    cfg: SheConfig,
    heat: HeatPropagator,
    q0: DensityField,
    noise_sd: f64,
    log_drift: f64,
}

impl SheRunner {
    pub fn new(cfg: &SheConfig) -> Result<Self> {
        cfg.validate()?;
        let heat = HeatPropagator::lattice(&cfg.grid, cfg.dt)?;
        let q0 = cfg.initial.build(&cfg.grid)?;
        let noise_sd = (cfg.dt / cfg.grid.cell_volume()).sqrt();
        let log_drift = -0.5 * cfg.beta * cfg.beta * cfg.kernel.r_origin() * cfg.dt;
        Ok(Self { cfg: cfg.clone(), heat, q0, noise_sd, log_drift })
    }

    pub fn config(&self) -> &SheConfig {
        &self.cfg
    }

    pub fn q0(&self) -> &DensityField {
        &self.q0
    }

    pub fn spectral(&self) -> &Spectral {
        self.heat.spectral()
    }

    /// The one-step lattice heat propagator.
    pub fn heat(&self) -> &HeatPropagator {
        &self.heat
    }

    pub fn realization(&self, index: u64) -> Realization<'_> {
        Realization {
            runner: self,
            rng: self.cfg.rng.stream(index),
            ws: Workspace::new(),
            u: self.q0.values().to_vec(),
            dw: vec![0.0; self.cfg.grid.len()],
            steps: 0,
        }
    }

    /// `E[u(t)]`: the lattice heat flow of `q0`.
    pub fn mean_field(&self, t: f64) -> Result<DensityField> {
        let steps = self.cfg.steps_to(t)?;
        let mut v = self.q0.values().to_vec();
        let mut ws = Workspace::new();
        for _ in 0..steps {
            self.heat.apply(&mut v, &mut ws)?;
        }
        DensityField::new(self.cfg.grid, v, t)
    }

    /// Runs `f` on every realization in index order. Discards and
    /// overflows are collected; any other error aborts the ensemble.
    pub fn run<T, F>(&self, f: F) -> Result<(Vec<T>, Discards)>
    where
        T: Send,
        F: Fn(&mut Realization<'_>) -> Result<T> + Sync + Send,
    {
        self.run_count(self.cfg.realizations, f)
    }

    pub fn run_count<T, F>(&self, count: usize, f: F) -> Result<(Vec<T>, Discards)>
    where
        T: Send,
        F: Fn(&mut Realization<'_>) -> Result<T> + Sync + Send,
    {
        let results = ensemble(count, self.cfg.threads, |i| {
            let mut r = self.realization(i);
            f(&mut r)
        });
        let mut values = Vec::with_capacity(count);
        let mut discards = Discards::default();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => values.push(v),
                Err(e @ (Error::Discard(_) | Error::Overflow { .. })) => discards.0.push((i as u64, e.to_string())),
                Err(e) => return Err(e),
            }
        }
        Ok((values, discards))
    }
}

/// One trajectory of the stochastic heat equation.
pub struct Realization<'a> {
    runner: &'a SheRunner,
    rng: ChaCha8Rng,
    ws: Workspace,
    u: Vec<f64>,
    dw: Vec<f64>,
    steps: usize,
}

impl<'a> Realization<'a> {
    pub fn runner(&self) -> &'a SheRunner {
        self.runner
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.runner.cfg.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.u) * self.runner.cfg.grid.cell_volume()
    }

    /// Draws the next noise increment from this realization's stream.
    pub fn draw_increment(&mut self) {
        let sd = self.runner.noise_sd;
        for v in self.dw.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *v = sd * z;
        }
        self.runner.cfg.kernel.mollify(&mut self.dw, &mut self.ws);
    }

    /// Draws white cell increments `ξ` with variance `dt/Δx^d` into `out`.
    pub fn draw_white(&mut self, out: &mut [f64]) {
        let sd = self.runner.noise_sd;
        for v in out.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *v = sd * z;
        }
    }

    /// Uses externally drawn white increments, mollified by this kernel.
    pub fn set_white(&mut self, xi: &[f64]) {
        self.dw.copy_from_slice(xi);
        self.runner.cfg.kernel.mollify(&mut self.dw, &mut self.ws);
    }

    /// The pending increment `ΔW`.
    pub fn increment(&self) -> &[f64] {
        &self.dw
    }

    /// Multiplicative factor `exp(β ΔW − ½ β² R(0) dt)` of cell `i`.
    pub fn factor(&self, i: usize) -> f64 {
        (self.runner.cfg.beta * self.dw[i] + self.runner.log_drift).exp()
    }

    /// Applies the pending increment.
    pub fn commit(&mut self) -> Result<()> {
        let beta = self.runner.cfg.beta;
        let drift = self.runner.log_drift;
        for (u, w) in self.u.iter_mut().zip(&self.dw) {
            *u *= (beta * w + drift).exp();
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { t: self.time() });
        }
        self.runner.heat.apply(&mut self.u, &mut self.ws)?;
        self.steps += 1;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.draw_increment();
        self.commit()
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = self.runner.cfg.steps_to(t)?;
        if target < self.steps {
            return Err(Error::Domain(format!("cannot step back to t = {t}")));
        }
        while self.steps < target {
            self.step()?;
        }
        Ok(())
    }

    /// Endpoint density `u / ∫u`.
    pub fn density(&self) -> Result<DensityField> {
        let u = DensityField::new(self.runner.cfg.grid, self.u.clone(), self.time())?;
        endpoint_density(&u)
    }
}

/// One exponential-Euler step followed by the lattice heat semigroup.
pub fn she_step(
    u: &DensityField,
    increment: &[f64],
    beta: f64,
    dt: f64,
    kernel: &CovarianceKernel,
) -> Result<DensityField> {
    if increment.len() != u.values().len() {
        return Err(Error::Domain("increment length does not match the grid".into()));
    }
    let drift = -0.5 * beta * beta * kernel.r_origin() * dt;
    let mut v: Vec<f64> = u.values().iter().zip(increment).map(|(x, w)| x * (beta * w + drift).exp()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { t: u.time() });
    }
    let heat = HeatPropagator::lattice(u.grid(), dt)?;
    heat.apply(&mut v, &mut Workspace::new())?;
    DensityField::new(*u.grid(), v, u.time() + dt)
}

/// Normalizes `u` to unit mass.
pub fn endpoint_density(u: &DensityField) -> Result<DensityField> {
    let m = u.mass();
    if !(m >= UNDERFLOW_FLOOR) || !m.is_finite() {
        return Err(Error::Discard(format!("total mass {m:.3e} below the underflow floor")));
    }
    let inv = 1.0 / m;
    let values = u.values().iter().map(|v| v * inv).collect();
    DensityField::new(*u.grid(), values, u.time())
}

/// Increments of one realization, recorded step by step.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub dt: f64,
    pub expected_variance: f64,
    pub increments: Vec<Vec<f64>>,
}

impl NoisePath {
    pub fn record(runner: &SheRunner, index: u64, steps: usize) -> Self {
        let mut r = runner.realization(index);
        let increments = (0..steps)
            .map(|_| {
                r.draw_increment();
                r.increment().to_vec()
            })
            .collect();
        let cfg = runner.config();
        Self { dt: cfg.dt, expected_variance: cfg.dt * cfg.kernel.r_origin(), increments }
    }

    /// Per-cell z-scores of the empirical variance against `dt·R(0)`.
    pub fn variance_zscores(&self) -> Vec<f64> {
        let k = self.increments.len() as f64;
        let cells = self.increments.first().map_or(0, |v| v.len());
        let se = self.expected_variance * (2.0 / k).sqrt();
        (0..cells)
            .map(|i| {
                let s: f64 = self.increments.iter().map(|w| w[i] * w[i]).sum::<f64>() / k;
                (s - self.expected_variance) / se
            })
            .collect()
    }
}

/// Estimates at a list of point tuples.
#[derive(Debug, Clone)]
pub struct QnReport {
    pub t: f64,
    pub grid: Grid,
    pub tuples: Vec<Vec<usize>>,
    pub estimates: Vec<McEstimate>,
    pub realizations: usize,
    pub discards: Discards,
    pub low_confidence: bool,
}

impl QnReport {
    pub fn csv_header(n: usize) -> String {
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        format!("T,n,{},mean,stderr,nreal,discards", xs.join(","))
    }

    pub fn to_csv(&self) -> String {
        let n = self.tuples.first().map_or(0, |t| t.len());
        let mut s = Self::csv_header(n);
        s.push('\n');
        let d = self.grid.dim();
        for (tuple, est) in self.tuples.iter().zip(&self.estimates) {
            let xs: Vec<String> = tuple
                .iter()
                .map(|&i| {
                    let p = self.grid.position(i);
                    p[..d].iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
                })
                .collect();
            s.push_str(&format!(
                "{:.16e},{},{},{:.16e},{:.16e},{},{}\n",
                self.t,
                tuple.len(),
                xs.join(","),
                est.mean,
                est.stderr,
                est.n,
                self.discards.len()
            ));
        }
        s
    }
}

/// Which field the tuple products are taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// The unnormalized solution `u`.
    Solution,
    /// The endpoint density `q = u/∫u`.
    Density,
}

/// `E[f(x_1)…f(x_n)]` at time `t` for each tuple of flat indices.
///
/// Factors are multiplied in sorted index order, so permuted tuples give
/// bitwise identical estimates.
pub fn estimate_products(runner: &SheRunner, tuples: &[Vec<usize>], t: f64, field: Field) -> Result<QnReport> {
    let grid = runner.config().grid;
    if tuples.is_empty() || tuples.iter().any(|tp| tp.is_empty() || tp.len() > 3) {
        return Err(Error::Domain("tuples must have 1 to 3 points".into()));
    }
    if tuples.iter().flatten().any(|&i| i >= grid.len()) {
        return Err(Error::Domain("tuple point outside the grid".into()));
    }
    let sorted: Vec<Vec<usize>> = tuples
        .iter()
        .map(|tp| {
            let mut s = tp.clone();
            s.sort_unstable();
            s
        })
        .collect();
    let (samples, discards) = runner.run(|r| {
        r.advance_to(t)?;
        let vals = match field {
            Field::Solution => r.u().to_vec(),
            Field::Density => r.density()?.into_values(),
        };
        Ok(sorted.iter().map(|tp| tp.iter().map(|&i| vals[i]).product::<f64>()).collect::<Vec<f64>>())
    })?;
    let valid = samples.len();
    let estimates = (0..tuples.len())
        .map(|k| {
            let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            McEstimate::from_samples(&col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QnReport {
        t,
        grid,
        tuples: tuples.to_vec(),
        estimates,
        realizations: valid,
        discards,
        low_confidence: valid < LOW_CONFIDENCE,
    })
}

/// `Q_n(t, x_1, …, x_n) = E[q(t,x_1)…q(t,x_n)]`.
pub fn estimate_qn(runner: &SheRunner, tuples: &[Vec<usize>], t: f64) -> Result<QnReport> {
    estimate_products(runner, tuples, t, Field::Density)
}

/// Solves `∂_t Q = ½ΔQ + β² R(x − y) Q` on the doubled grid from
/// `Q(0) = q0 ⊗ q0` with Strang splitting and step `dt`. Returns the
/// `N × N` samples of `E[u(t,x) u(t,y)]`, row index `x`.
pub fn two_point_moment(q0: &DensityField, kernel: &CovarianceKernel, beta: f64, t: f64, dt: f64) -> Result<Vec<f64>> {
    let g1 = *q0.grid();
    if g1.dim() != 1 {
        return Err(Error::Inapplicable("the two-point solver is one-dimensional".into()));
    }
    let steps = (t / dt).round();
    if !(dt > 0.0) || (steps * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::Config(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    let n = g1.points_per_axis();
    let g2 = Grid::new(2, g1.half_width(), n)?;
    let spectral = Spectral::new(&g2);
    let r = kernel.covariance();
    let half: Vec<f64> = (0..n * n)
        .map(|flat| {
            let (i, j) = (flat / n, flat % n);
            let k = (i + n + n / 2 - j) % n;
            (0.5 * beta * beta * r[k] * dt).exp()
        })
        .collect();
    let heat = spectral.heat_multiplier(dt);
    let q = q0.values();
    let mut v: Vec<f64> = (0..n * n).map(|flat| q[flat / n] * q[flat % n]).collect();
    let mut ws = Workspace::new();
    for _ in 0..steps as usize {
        v.iter_mut().zip(&half).for_each(|(x, h)| *x *= h);
        spectral.apply_real(&mut v, &heat, &mut ws);
        v.iter_mut().zip(&half).for_each(|(x, h)| *x *= h);
    }
    Ok(v)
}

/// Successive coupled differences of the mollified density at a probe.
#[derive(Debug, Clone)]
pub struct MollificationTable {
    pub widths: Vec<f64>,
    /// `E[(q_{w_k} − q_{w_{k+1}})²]` at the probe, for consecutive widths.
    pub differences: Vec<McEstimate>,
    /// Paired estimate of the first difference minus the second.
    pub decrease: McEstimate,
    pub monotone: bool,
    pub discards: Discards,
}

/// Couples three mollification widths through shared white-noise draws.
pub fn mollification_study(
    base: &SheConfig,
    spec: MollifierSpec,
    widths: [f64; 3],
    probe: usize,
) -> Result<MollificationTable> {
    if base.grid.dim() != 1 {
        return Err(Error::Inapplicable("the mollification study is one-dimensional".into()));
    }
    let runners = widths
        .iter()
        .map(|&w| {
            let mut cfg = base.clone();
            cfg.kernel = make_kernel(MollifierSpec { width: w, ..spec }, &base.grid)?;
            SheRunner::new(&cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = base.steps_to(base.t_final)?;
    let (samples, discards) = runners[0].run(|r0| {
        let mut rs: Vec<Realization<'_>> = runners.iter().map(|rn| rn.realization(0)).collect();
        let mut xi = vec![0.0; base.grid.len()];
        for _ in 0..steps {
            r0.draw_white(&mut xi);
            for r in rs.iter_mut() {
                r.set_white(&xi);
                r.commit()?;
            }
        }
        let q: Vec<f64> = rs.iter().map(|r| r.density().map(|d| d.values()[probe])).collect::<Result<_>>()?;
        Ok([(q[0] - q[1]).powi(2), (q[1] - q[2]).powi(2)])
    })?;
    let d1: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    let d2: Vec<f64> = samples.iter().map(|s| s[1]).collect();
    let diff: Vec<f64> = samples.iter().map(|s| s[0] - s[1]).collect();
    let decrease = McEstimate::from_samples(&diff)?;
    let monotone = decrease.mean > 2.0 * decrease.stderr || (decrease.mean == 0.0 && decrease.stderr == 0.0);
    Ok(MollificationTable {
        widths: widths.to_vec(),
        differences: vec![McEstimate::from_samples(&d1)?, McEstimate::from_samples(&d2)?],
        decrease,
        monotone,
        discards,
    })
}

/// Sample moments of `(∫u)^{-1}` on the full ensemble and its first half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMassMoments {
    pub fourth_full: f64,
    pub fourth_half: f64,
    pub realizations: usize,
    /// Whether the two fourth moments agree within a factor of 1.5.
    pub stable: bool,
}

pub fn inverse_mass_moments(runner: &SheRunner) -> Result<InverseMassMoments> {
    let t = runner.config().t_final;
    let (inv, discards) = runner.run(|r| {
        r.advance_to(t)?;
        let m = r.mass();
        if !(m >= UNDERFLOW_FLOOR) {
            return Err(Error::Discard(format!("total mass {m:.3e}")));
        }
        Ok(1.0 / m)
    })?;
    if !discards.is_empty() {
        return Err(Error::Invariant(format!("{} realizations discarded", discards.len())));
    }
    InverseMassMoments::from_inverse(&inv)
}

impl InverseMassMoments {
    /// Moments from samples of `(∫u)^{-1}` in realization order.
    pub fn from_inverse(inv: &[f64]) -> Result<Self> {
        if inv.len() < 4 {
            return Err(Error::Domain("need at least 4 samples".into()));
        }
        let m4 = |s: &[f64]| pairwise_sum(&s.iter().map(|v| v.powi(4)).collect::<Vec<_>>()) / s.len() as f64;
        let full = m4(inv);
        let half = m4(&inv[..inv.len() / 2]);
        let ratio = full / half;
        Ok(Self {
            fourth_full: full,
            fourth_half: half,
            realizations: inv.len(),
            stable: full.is_finite() && ratio < 1.5 && ratio > 1.0 / 1.5,
        })
    }
}

/// Ratios `E[q(t,x)²] / (E[u(t,x)])²` at probes, with the constant fitted
/// at the first probe.
#[derive(Debug, Clone)]
pub struct MomentBoundProxy {
    pub probes: Vec<usize>,
    pub ratios: Vec<McEstimate>,
    pub constant: f64,
    /// Every probe ratio stays below the constant within two standard errors.
    pub holds: bool,
}

pub fn moment_bound_proxy(runner: &SheRunner, probes: &[usize]) -> Result<MomentBoundProxy> {
    let t = runner.config().t_final;
    let mean = runner.mean_field(t)?;
    let tuples: Vec<Vec<usize>> = probes.iter().map(|&p| vec![p, p]).collect();
    let rep = estimate_qn(runner, &tuples, t)?;
    let ratios: Vec<McEstimate> = rep
        .estimates
        .iter()
        .zip(probes)
        .map(|(e, &p)| {
            let g2 = mean.values()[p].powi(2);
            McEstimate { mean: e.mean / g2, stderr: e.stderr / g2, n: e.n }
        })
        .collect();
    let constant = ratios.first().map_or(0.0, |r| r.mean);
    let holds = ratios.iter().all(|r| r.mean <= constant + 2.0 * r.stderr.hypot(ratios[0].stderr));
    Ok(MomentBoundProxy { probes: probes.to_vec(), ratios, constant, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac_cfg(beta: f64, reals: usize) -> SheConfig {
        let g = Grid::new(1, 4.0, 64).unwrap();
        let dt = 0.5 * g.spacing().powi(2);
        SheConfig::new(CovarianceKernel::dirac(&g).unwrap(), beta, dt, 16.0 * dt, reals, 3)
    }

    #[test]
    fn config_checks() {
        let mut c = dirac_cfg(0.5, 10);
        c.dt *= 1.5;
        assert!(c.validate().is_err());
        let c = dirac_cfg(0.5, 1);
        assert!(c.validate().is_err());
        let c = dirac_cfg(0.5, 10);
        assert!(c.steps_to(c.dt * 2.5).is_err());
        assert_eq!(c.steps_to(c.dt * 7.0).unwrap(), 7);
    }

    #[test]
    fn zero_beta_is_the_lattice_heat_flow() {
        let c = dirac_cfg(0.0, 4);
        let runner = SheRunner::new(&c).unwrap();
        let mut r = runner.realization(2);
        r.advance_to(c.t_final).unwrap();
        let expect = runner.mean_field(c.t_final).unwrap();
        assert_eq!(r.u(), expect.values());
    }

    #[test]
    fn density_has_unit_mass_and_positive_values() {
        let c = dirac_cfg(1.0, 4);
        let runner = SheRunner::new(&c).unwrap();
        let mut r = runner.realization(0);
        r.advance_to(c.t_final).unwrap();
        let q = r.density().unwrap();
        assert!((q.mass() - 1.0).abs() < 1e-14);
        assert!(r.u()[30..34].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn underflow_is_a_discard() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let u = DensityField::new(g, vec![1e-300; 16], 0.0).unwrap();
        assert!(matches!(endpoint_density(&u), Err(Error::Discard(_))));
    }

    #[test]
    fn public_step_matches_realization() {
        let c = dirac_cfg(0.7, 4);
        let runner = SheRunner::new(&c).unwrap();
        let mut r = runner.realization(5);
        r.draw_increment();
        let dw = r.increment().to_vec();
        let u0 = runner.q0().clone();
        r.commit().unwrap();
        let v = she_step(&u0, &dw, c.beta, c.dt, &c.kernel).unwrap();
        assert_eq!(v.values(), r.u());
    }

    #[test]
    fn permuted_tuples_are_bitwise_equal() {
        let c = dirac_cfg(0.5, 20);
        let runner = SheRunner::new(&c).unwrap();
        let rep =
            estimate_qn(&runner, &[vec![30, 33], vec![33, 30], vec![31, 32, 33], vec![33, 31, 32]], c.t_final).unwrap();
        assert_eq!(rep.estimates[0], rep.estimates[1]);
        assert_eq!(rep.estimates[2], rep.estimates[3]);
        assert!(rep.low_confidence);
    }

    #[test]
    fn two_point_solver_without_noise_is_a_product() {
        let g = Grid::new(1, 6.0, 64).unwrap();
        let q0 = InitialData::Gaussian { variance: 0.5 }.build(&g).unwrap();
        let k = make_kernel(MollifierSpec::smooth(1.0), &g).unwrap();
        let v = two_point_moment(&q0, &k, 0.0, 0.5, 0.05).unwrap();
        let h = crate::heat::heat_propagate(&q0, 0.5).unwrap();
        for (i, j) in [(32, 32), (30, 35), (20, 40)] {
            let e = h.values()[i] * h.values()[j];
            assert!((v[i * 64 + j] - e).abs() < 1e-13);
        }
    }
}
