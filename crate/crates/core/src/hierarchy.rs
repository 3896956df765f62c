//! Moment-hierarchy checks on simulated endpoint densities: the weak
//! identity, the generator, the error form and the mean-square
//! displacement trend.
//!
//! Realizations evolve under the lattice heat semigroup, so the
//! `½Δ f` terms paired against `q` use the matching 3-point stencil
//! `½Δ_h`. Pairings with `q = u/∫u` are formed as ratios of sums of `u`,
//! which makes `⟨1, q⟩ = 1` exact.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, DensityField};
use crate::grid::Grid;
use crate::heat::heat_kernel;
use crate::kernel::CovarianceKernel;
use crate::mc::McEstimate;
use crate::she::{Discards, SheConfig, SheRunner, LOW_CONFIDENCE};
use crate::spectral::{Spectral, Workspace};

/// Test functions with closed-form Laplacians and heat smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `f ≡ 1`.
    Constant,
    /// `f(x) = |x|²`.
    SquaredNorm,
    /// `exp(−|x − c|² / 2w²)`.
    Gaussian { center: [f64; 3], width: f64 },
    /// `clamp(v·x − b, −cap, cap)` with unit `v`; Lipschitz with constant 1.
    Ramp { direction: [f64; 3], offset: f64, cap: f64 },
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl TestFunction {
    pub fn gaussian(width: f64) -> Self {
        Self::Gaussian { center: [0.0; 3], width }
    }

    /// Parses `one`, `x2`, `gauss:w` or `ramp:v1,v2,v3:b:cap`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unrecognized test function `{s}`"));
        let mut parts = s.trim().split(':');
        match parts.next().ok_or_else(bad)? {
            "one" => Ok(Self::Constant),
            "x2" => Ok(Self::SquaredNorm),
            "gauss" => {
                let w: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if !(w > 0.0) {
                    return Err(bad());
                }
                Ok(Self::gaussian(w))
            }
            "ramp" => {
                let v: Vec<f64> = parts
                    .next()
                    .ok_or_else(bad)?
                    .split(',')
                    .map(|t| t.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                let offset = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let cap = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if v.is_empty() || v.len() > 3 {
                    return Err(bad());
                }
                let mut direction = [0.0; 3];
                direction[..v.len()].copy_from_slice(&v);
                Self::ramp(direction, offset, cap)
            }
            _ => Err(bad()),
        }
    }

    /// Ramp with `direction` normalized to unit length.
    pub fn ramp(direction: [f64; 3], offset: f64, cap: f64) -> Result<Self> {
        let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0) || !(cap > 0.0) {
            return Err(Error::Domain("ramp needs a nonzero direction and a positive cap".into()));
        }
        Ok(Self::Ramp { direction: direction.map(|v| v / n), offset, cap })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::SquaredNorm => x.iter().map(|v| v * v).sum(),
            Self::Gaussian { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                (-0.5 * r2 / (width * width)).exp()
            }
            Self::Ramp { direction, offset, cap } => {
                let s: f64 = x.iter().zip(direction).map(|(a, v)| a * v).sum::<f64>() - offset;
                s.clamp(-cap, cap)
            }
        }
    }

    /// `½Δf(x)`; zero for the ramp away from its kinks.
    pub fn half_laplacian(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match *self {
            Self::Constant | Self::Ramp { .. } => 0.0,
            Self::SquaredNorm => d,
            Self::Gaussian { center, width } => {
                let w2 = width * width;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                0.5 * self.eval(x) * (r2 / (w2 * w2) - d / w2)
            }
        }
    }

    /// `½Δ_h f(x)` with the 3-point stencil of spacing `h` on each axis.
    pub fn half_laplacian_lattice(&self, x: &[f64], h: f64) -> f64 {
        let f0 = self.eval(x);
        let mut p = [0.0; 3];
        p[..x.len()].copy_from_slice(x);
        let mut acc = 0.0;
        for a in 0..x.len() {
            p[a] = x[a] + h;
            let fp = self.eval(&p[..x.len()]);
            p[a] = x[a] - h;
            let fm = self.eval(&p[..x.len()]);
            p[a] = x[a];
            acc += fp - 2.0 * f0 + fm;
        }
        0.5 * acc / (h * h)
    }

    /// `E[f(x + √τ Z)]` for a standard Gaussian `Z` in `x.len()` dimensions.
    pub fn heat_smoothed(&self, tau: f64, x: &[f64]) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("smoothing time must be >= 0, got {tau}")));
        }
        if tau == 0.0 {
            return Ok(self.eval(x));
        }
        let d = x.len() as f64;
        Ok(match *self {
            Self::Constant => 1.0,
            Self::SquaredNorm => x.iter().map(|v| v * v).sum::<f64>() + d * tau,
            Self::Gaussian { center, width } => {
                let s2 = width * width + tau;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                (width * width / s2).powf(0.5 * d) * (-0.5 * r2 / s2).exp()
            }
            Self::Ramp { direction, offset, cap } => {
                let m: f64 = x.iter().zip(direction).map(|(a, v)| a * v).sum::<f64>() - offset;
                let sd = tau.sqrt();
                let (lo, hi) = ((-cap - m) / sd, (cap - m) / sd);
                let (plo, phi) = (normal_cdf(lo), normal_cdf(hi));
                -cap * plo + cap * (1.0 - phi) + m * (phi - plo) + sd * (normal_pdf(lo) - normal_pdf(hi))
            }
        })
    }

    pub fn samples(&self, grid: &Grid) -> Vec<f64> {
        let d = grid.dim();
        (0..grid.len()).map(|i| self.eval(&grid.position(i)[..d])).collect()
    }

    pub fn half_laplacian_samples(&self, grid: &Grid) -> Vec<f64> {
        let d = grid.dim();
        (0..grid.len()).map(|i| self.half_laplacian(&grid.position(i)[..d])).collect()
    }

    pub fn lattice_laplacian_samples(&self, grid: &Grid) -> Vec<f64> {
        let d = grid.dim();
        let h = grid.spacing();
        (0..grid.len()).map(|i| self.half_laplacian_lattice(&grid.position(i)[..d], h)).collect()
    }
}

/// `f_ε(t, x) = ∫ h(εz) G_{ε⁻² − t}(x − z) dz`, the backward heat flow
/// from `h(ε·)` at time `ε⁻²`.
pub fn backward_heat_f(h: &TestFunction, eps: f64, t: f64, x: &[f64]) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let horizon = 1.0 / (eps * eps);
    if !(0.0..=horizon * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    let tau = (1.0 - eps * eps * t).max(0.0);
    let scaled: Vec<f64> = x.iter().map(|v| eps * v).collect();
    h.heat_smoothed(tau, &scaled)
}

/// Quadrature weights on the step grid: Simpson for an even number of
/// steps, trapezoid otherwise.
pub fn node_weights(steps: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![0.0; steps + 1];
    if steps == 0 {
        return w;
    }
    if steps.is_multiple_of(2) {
        for (k, v) in w.iter_mut().enumerate() {
            *v = if k == 0 || k == steps {
                dt / 3.0
            } else if k % 2 == 1 {
                4.0 * dt / 3.0
            } else {
                2.0 * dt / 3.0
            };
        }
    } else {
        for (k, v) in w.iter_mut().enumerate() {
            *v = if k == 0 || k == steps { 0.5 * dt } else { dt };
        }
    }
    w
}

/// Sums of an unnormalized field `u` that give pairings with `q = u/∫u`.
struct Pairing {
    z: f64,
    vol: f64,
    uru: Vec<f64>,
}

impl Pairing {
    fn new(u: &[f64], kernel: &CovarianceKernel, vol: f64, ws: &mut Workspace) -> Self {
        let z = pairwise_sum(u);
        let ru = kernel.convolve(u, ws);
        let uru = u.iter().zip(&ru).map(|(a, b)| a * b).collect();
        Self { z, vol, uru }
    }

    /// `⟨f, q⟩`.
    fn linear(&self, f: &[f64], u: &[f64]) -> f64 {
        let fu: Vec<f64> = f.iter().zip(u).map(|(a, b)| a * b).collect();
        pairwise_sum(&fu) / self.z
    }

    /// `⟨R ⋆ q, q⟩`.
    fn energy(&self) -> f64 {
        pairwise_sum(&self.uru) / (self.z * self.z * self.vol)
    }

    /// `⟨f q, R ⋆ q⟩`.
    fn weighted(&self, f: &[f64]) -> f64 {
        let w: Vec<f64> = f.iter().zip(&self.uru).map(|(a, b)| a * b).collect();
        pairwise_sum(&w) / (self.z * self.z * self.vol)
    }
}

/// Per-realization value of `⟨f_{k,R}, q^{⊗(1+k)}⟩` for a one-point test
/// function (`n = 1`).
pub fn fkr_value(f: &[f64], k: usize, q: &[f64], kernel: &CovarianceKernel, ws: &mut Workspace) -> Result<f64> {
    let grid = kernel.grid();
    if f.len() != grid.len() || q.len() != grid.len() {
        return Err(Error::Domain("field length does not match the kernel grid".into()));
    }
    let p = Pairing::new(q, kernel, grid.cell_volume(), ws);
    match k {
        0 => Ok(0.0),
        1 => Ok(-p.weighted(f)),
        2 => Ok(p.linear(f, q) * p.energy()),
        _ => Err(Error::Domain(format!("k must be 0, 1 or 2, got {k}"))),
    }
}

/// Monte Carlo average of [`fkr_value`] over density fields.
pub fn fkr_pairing(
    f: &TestFunction,
    k: usize,
    fields: &[DensityField],
    kernel: &CovarianceKernel,
) -> Result<McEstimate> {
    let samples = f.samples(kernel.grid());
    let mut ws = Workspace::new();
    let values = fields
        .iter()
        .map(|q| {
            if q.grid() != kernel.grid() {
                return Err(Error::Domain("density and kernel grids differ".into()));
            }
            fkr_value(&samples, k, q.values(), kernel, &mut ws)
        })
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_samples(&values)
}

/// Terms of the weak hierarchy identity, each a Monte Carlo estimate.
#[derive(Debug, Clone)]
pub struct WeakFormLedger {
    pub n: usize,
    pub t: f64,
    pub boundary_final: McEstimate,
    pub boundary_initial: McEstimate,
    pub generator: McEstimate,
    /// `β² ∫⟨f_{k,R}, Q_{n+k}⟩` for `k = 0, 1, 2`.
    pub coupling: [McEstimate; 3],
    /// Left side minus right side, estimated per realization.
    pub residual: McEstimate,
    /// Root-sum-square of the component standard errors.
    pub rss_stderr: f64,
    pub budget: f64,
    pub discards: Discards,
    pub low_confidence: bool,
    pub pass: bool,
}

impl WeakFormLedger {
    pub fn csv_header() -> &'static str {
        "term,value,stderr"
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::csv_header());
        let mut row = |name: &str, e: &McEstimate| s.push_str(&format!("{name},{:.16e},{:.16e}\n", e.mean, e.stderr));
        row("boundary_final", &self.boundary_final);
        row("boundary_initial", &self.boundary_initial);
        row("generator", &self.generator);
        row("coupling_k0", &self.coupling[0]);
        row("coupling_k1", &self.coupling[1]);
        row("coupling_k2", &self.coupling[2]);
        row("residual", &self.residual);
        s
    }
}

/// Checks the weak hierarchy identity for `n = 1` with test function `f`,
/// or `n = 2` with the product `f ⊗ f`, at the runner's final time.
///
/// Time integrals use every step of each path as a node.
pub fn weak_residual(runner: &SheRunner, n: usize, f: &TestFunction, budget: f64) -> Result<WeakFormLedger> {
    let cfg = runner.config();
    if !(n == 1 || n == 2) {
        return Err(Error::Domain(format!("n must be 1 or 2, got {n}")));
    }
    let t = cfg.t_final;
    let steps = cfg.steps_to(t)?;
    if steps < 16 {
        return Err(Error::Config(format!("{steps} time nodes; at least 16 are required")));
    }
    let grid = cfg.grid;
    let vol = grid.cell_volume();
    let beta2 = cfg.beta * cfg.beta;
    let fs = f.samples(&grid);
    let hl = f.lattice_laplacian_samples(&grid);
    let w = node_weights(steps, cfg.dt);
    let nf = n as f64;
    let (samples, discards) = runner.run(|r| {
        let mut ws = Workspace::new();
        let mut acc = [0.0f64; 5];
        let mut ends = [0.0f64; 2];
        for (k, wk) in w.iter().enumerate() {
            if k > 0 {
                r.step()?;
            }
            let u = r.u();
            let p = Pairing::new(u, &cfg.kernel, vol, &mut ws);
            let lin = p.linear(&fs, u);
            let gen1 = p.linear(&hl, u);
            let a = p.energy();
            let b = p.weighted(&fs);
            let (bnd, gen, k0, k1, k2) = if n == 1 {
                (lin, gen1, 0.0, -b, lin * a)
            } else {
                let fu: Vec<f64> = fs.iter().zip(u).map(|(x, y)| x * y).collect();
                let rfu = cfg.kernel.convolve(&fu, &mut ws);
                let prod: Vec<f64> = fu.iter().zip(&rfu).map(|(x, y)| x * y).collect();
                let k0 = pairwise_sum(&prod) / (p.z * p.z * vol);
                (lin * lin, 2.0 * lin * gen1, k0, -2.0 * nf * lin * b, 3.0 * lin * lin * a)
            };
            if k == 0 {
                ends[0] = bnd;
            }
            if k == steps {
                ends[1] = bnd;
            }
            acc[0] += wk * gen;
            acc[1] += wk * k0;
            acc[2] += wk * k1;
            acc[3] += wk * k2;
            acc[4] += wk * ((k0 + k1) + k2);
        }
        let residual = (ends[1] - ends[0]) - acc[0] - beta2 * acc[4];
        Ok([ends[1], ends[0], acc[0], beta2 * acc[1], beta2 * acc[2], beta2 * acc[3], residual])
    })?;
    let col = |i: usize| -> Result<McEstimate> {
        let v: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        McEstimate::from_samples(&v)
    };
    let boundary_final = col(0)?;
    let boundary_initial = col(1)?;
    let generator = col(2)?;
    let coupling = [col(3)?, col(4)?, col(5)?];
    let residual = col(6)?;
    let rss_stderr = [&boundary_final, &boundary_initial, &generator, &coupling[0], &coupling[1], &coupling[2]]
        .iter()
        .map(|e| e.stderr * e.stderr)
        .sum::<f64>()
        .sqrt();
    let pass = discards.is_empty() && residual.mean.abs() <= 3.0 * residual.stderr + budget;
    Ok(WeakFormLedger {
        n,
        t,
        boundary_final,
        boundary_initial,
        generator,
        coupling,
        residual,
        rss_stderr,
        budget,
        low_confidence: samples.len() < LOW_CONFIDENCE,
        discards,
        pass,
    })
}

/// `𝒯q = ⟨R ⋆ q, q⟩ q − q R ⋆ q`.
pub fn t_operator(q: &[f64], kernel: &CovarianceKernel) -> Vec<f64> {
    let mut ws = Workspace::new();
    let rq = kernel.convolve(q, &mut ws);
    let vol = kernel.grid().cell_volume();
    let e = crate::field::inner(&rq, q, vol);
    q.iter().zip(&rq).map(|(a, b)| e * a - a * b).collect()
}

/// `⟨½Δf, q0⟩ + β² ⟨f, 𝒯q0⟩` by quadrature on the grid of `q0`.
pub fn generator_rhs(f: &TestFunction, q0: &DensityField, beta: f64, kernel: &CovarianceKernel) -> Result<f64> {
    let grid = q0.grid();
    if grid != kernel.grid() {
        return Err(Error::Domain("density and kernel grids differ".into()));
    }
    let vol = grid.cell_volume();
    let lap = crate::field::inner(&f.half_laplacian_samples(grid), q0.values(), vol);
    let tq = t_operator(q0.values(), kernel);
    Ok(lap + beta * beta * crate::field::inner(&f.samples(grid), &tq, vol))
}

/// One row of the generator convergence table.
#[derive(Debug, Clone)]
pub struct GeneratorRow {
    pub t: f64,
    pub steps: usize,
    /// `(E⟨f, q_T⟩ − ⟨f, q0⟩)/T` with control variates.
    pub slope: McEstimate,
    /// The same slope without control variates.
    pub raw_slope: McEstimate,
    pub discards: Discards,
}

#[derive(Debug, Clone)]
pub struct GeneratorTable {
    pub rhs: f64,
    /// `⟨½Δf, q0⟩`.
    pub diffusion: f64,
    pub rows: Vec<GeneratorRow>,
    /// Deviation ratios between consecutive rows (larger `T` over smaller).
    pub ratios: Vec<McEstimate>,
    pub pass: bool,
}

impl GeneratorTable {
    pub fn csv_header() -> &'static str {
        "T,steps,slope,stderr,raw_slope,raw_stderr,rhs,deviation,ratio,ratio_stderr"
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::csv_header());
        for (i, r) in self.rows.iter().enumerate() {
            let (ratio, rse) = if i == 0 {
                (f64::NAN, f64::NAN)
            } else {
                self.ratios.get(i - 1).map_or((f64::NAN, f64::NAN), |e| (e.mean, e.stderr))
            };
            s.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.t,
                r.steps,
                r.slope.mean,
                r.slope.stderr,
                r.raw_slope.mean,
                r.raw_slope.stderr,
                self.rhs,
                r.slope.mean - self.rhs,
                ratio,
                rse
            ));
        }
        s
    }
}

/// Accepted range of the deviation ratio per halving of `T`.
pub const HALVING_RATIO: (f64, f64) = (1.5, 2.5);

/// Finite-difference slopes of `E⟨f, q_T⟩` for each `T` in `t_list`
/// (descending, successive halvings), each with `steps_per_t` steps.
///
/// Each step's martingale increment is reduced by control variates with
/// exactly zero mean, built from the step's lognormal factors to second
/// order.
pub fn generator_check(
    base: &SheConfig,
    f: &TestFunction,
    t_list: &[f64],
    steps_per_t: usize,
) -> Result<GeneratorTable> {
    if t_list.is_empty() || steps_per_t == 0 {
        return Err(Error::Config("empty time list or zero steps".into()));
    }
    let runner0 =
        SheRunner::new(&SheConfig { dt: t_list[0] / steps_per_t as f64, t_final: t_list[0], ..base.clone() })?;
    let q0 = runner0.q0().clone();
    let rhs = generator_rhs(f, &q0, base.beta, &base.kernel)?;
    let grid = base.grid;
    let vol = grid.cell_volume();
    let diffusion = crate::field::inner(&f.half_laplacian_samples(&grid), q0.values(), vol);
    let fs = f.samples(&grid);
    let spectral = Spectral::new(&grid);
    let cov = base.kernel.covariance();
    let mut rows = Vec::with_capacity(t_list.len());
    for (i, &t) in t_list.iter().enumerate() {
        let cfg =
            SheConfig { dt: t / steps_per_t as f64, t_final: t, rng: base.rng.derive(i as u64 + 1), ..base.clone() };
        let runner = SheRunner::new(&cfg)?;
        let b2dt = cfg.beta * cfg.beta * cfg.dt;
        let c: Vec<f64> = cov.iter().map(|r| (b2dt * r).exp_m1()).collect();
        let c_hat = spectral.kernel_spectrum(&c, &mut Workspace::new());
        let mut hf = fs.clone();
        runner.heat().apply_signed(&mut hf, &mut Workspace::new());
        let (samples, discards) = runner.run(|r| {
            let mut ws = Workspace::new();
            let mut total = 0.0;
            let mut cv = 0.0;
            for _ in 0..steps_per_t {
                let u = r.u();
                let z = pairwise_sum(u);
                let q: Vec<f64> = u.iter().map(|v| v / (z * vol)).collect();
                let before = crate::field::inner(&fs, &q, vol);
                let p = crate::field::inner(&hf, &q, vol);
                let mut cq = q.clone();
                spectral.apply_complex(&mut cq, &c_hat, &mut ws);
                let hfq: Vec<f64> = hf.iter().zip(&q).map(|(a, b)| a * b).collect();
                let e_ab = crate::field::inner(&hfq, &cq, vol);
                let e_bb = crate::field::inner(&q, &cq, vol);
                r.draw_increment();
                let y1: Vec<f64> = (0..q.len()).map(|i| r.factor(i) - 1.0).collect();
                let a = crate::field::inner(&hfq, &y1, vol);
                let b = crate::field::inner(&q, &y1, vol);
                cv += (a - p * b) - (a * b - e_ab) + p * (b * b - e_bb);
                r.commit()?;
                let after = r.u();
                let fu = crate::field::inner(&fs, after, vol) / (pairwise_sum(after) * vol);
                total += fu - before;
            }
            Ok([(total - cv) / t, total / t])
        })?;
        let slope: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let raw: Vec<f64> = samples.iter().map(|s| s[1]).collect();
        rows.push(GeneratorRow {
            t,
            steps: steps_per_t,
            slope: McEstimate::from_samples(&slope)?,
            raw_slope: McEstimate::from_samples(&raw)?,
            discards,
        });
    }
    let ratios: Vec<McEstimate> = rows
        .windows(2)
        .map(|w| {
            let (d1, d2) = (w[0].slope.mean - rhs, w[1].slope.mean - rhs);
            let r = d1 / d2;
            let se = r.abs() * ((w[0].slope.stderr / d1).powi(2) + (w[1].slope.stderr / d2).powi(2)).sqrt();
            McEstimate { mean: r, stderr: se, n: w[0].slope.n.min(w[1].slope.n) }
        })
        .collect();
    let clean = rows.iter().all(|r| r.discards.is_empty());
    let pass = clean
        && if base.beta == 0.0 {
            rows.iter().all(|r| (r.slope.mean - diffusion).abs() <= 1e-8)
        } else {
            ratios
                .iter()
                .all(|r| r.mean + 2.0 * r.stderr >= HALVING_RATIO.0 && r.mean - 2.0 * r.stderr <= HALVING_RATIO.1)
        };
    Ok(GeneratorTable { rhs, diffusion, rows, ratios, pass })
}

/// Both sides of the error-form identity at `T = ε⁻²`.
#[derive(Debug, Clone)]
pub struct ErrorForm {
    pub eps: f64,
    pub t: f64,
    /// `E⟨f_ε(T), q_T⟩ − ⟨f_ε(0), q0⟩`.
    pub lhs: McEstimate,
    /// `β² ∫ E[⟨f_ε, q⟩⟨R⋆q, q⟩ − ⟨f_ε q, R⋆q⟩] dt`.
    pub rhs: McEstimate,
    /// Per-realization `lhs − rhs`.
    pub difference: McEstimate,
    pub combined_stderr: f64,
    /// `∫h(x)G_1(x)dx`, the boundary value for a point mass at the origin.
    pub point_mass_boundary: f64,
    pub discards: Discards,
    pub pass: bool,
}

impl ErrorForm {
    pub fn csv_header() -> &'static str {
        "eps,T,lhs,lhs_stderr,rhs,rhs_stderr,difference,difference_stderr,combined_stderr"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.eps,
            self.t,
            self.lhs.mean,
            self.lhs.stderr,
            self.rhs.mean,
            self.rhs.stderr,
            self.difference.mean,
            self.difference.stderr,
            self.combined_stderr
        )
    }
}

pub fn error_form(runner: &SheRunner, h: &TestFunction, eps: f64, budget: f64) -> Result<ErrorForm> {
    let cfg = runner.config();
    if cfg.kernel.is_dirac() {
        return Err(Error::Inapplicable("the error form needs a smooth covariance kernel".into()));
    }
    let t = 1.0 / (eps * eps);
    let steps = cfg.steps_to(t).map_err(|_| Error::Config(format!("1/eps² = {t} is not a multiple of dt")))?;
    let grid = cfg.grid;
    let d = grid.dim();
    let vol = grid.cell_volume();
    let beta2 = cfg.beta * cfg.beta;
    let w = node_weights(steps, cfg.dt);
    let table: Vec<Vec<f64>> = (0..=steps)
        .map(|k| {
            let tk = (k as f64 * cfg.dt).min(t);
            (0..grid.len()).map(|i| backward_heat_f(h, eps, tk, &grid.position(i)[..d])).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (samples, discards) = runner.run(|r| {
        let mut ws = Workspace::new();
        let mut integral = 0.0;
        let mut ends = [0.0; 2];
        for (k, wk) in w.iter().enumerate() {
            if k > 0 {
                r.step()?;
            }
            let u = r.u();
            let p = Pairing::new(u, &cfg.kernel, vol, &mut ws);
            let lin = p.linear(&table[k], u);
            integral += wk * (lin * p.energy() - p.weighted(&table[k]));
            if k == 0 {
                ends[0] = lin;
            }
            if k == steps {
                ends[1] = lin;
            }
        }
        let lhs = ends[1] - ends[0];
        let rhs = beta2 * integral;
        Ok([lhs, rhs, lhs - rhs])
    })?;
    let col = |i: usize| -> Result<McEstimate> {
        let v: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        McEstimate::from_samples(&v)
    };
    let lhs = col(0)?;
    let rhs = col(1)?;
    let difference = col(2)?;
    let combined_stderr = lhs.stderr.hypot(rhs.stderr);
    let point_mass_boundary = h.heat_smoothed(1.0, &vec![0.0; d])?;
    let pass = discards.is_empty() && (lhs.mean - rhs.mean).abs() <= 3.0 * combined_stderr + budget;
    Ok(ErrorForm { eps, t, lhs, rhs, difference, combined_stderr, point_mass_boundary, discards, pass })
}

/// One time of the mean-square displacement table.
#[derive(Debug, Clone)]
pub struct MsdRow {
    pub t: f64,
    /// `E∫|x|² q(T, x) dx`.
    pub m2: McEstimate,
    /// `|m₂/T − d|`.
    pub deviation: f64,
    /// `|(m₂ − m₂(0))/T − d|`, which removes the width of `q0`.
    pub corrected_deviation: f64,
    /// Standard error of both deviations.
    pub stderr: f64,
    /// Mean over axes of the 1D Wasserstein distance between the
    /// coordinate marginals of `Q_1(T, √T ·)` and the standard Gaussian.
    pub marginal_w1: f64,
    /// `sup_r |E⟨r(·/√T), q_T⟩ − E r(Z)|` over random Lipschitz ramps.
    pub ramp_sup: f64,
}

/// Annealed ratio `Q_1(t, x)/G_t(x)` at one probe.
#[derive(Debug, Clone)]
pub struct AnnealedProbe {
    pub t: f64,
    pub radius: f64,
    pub ratio: McEstimate,
}

#[derive(Debug, Clone)]
pub struct MsdTable {
    pub initial_m2: f64,
    pub rows: Vec<MsdRow>,
    /// Least-squares slope of `log deviation` against `log T`.
    pub slope: f64,
    pub corrected_slope: f64,
    /// Deviations never grow by more than one combined standard error.
    pub monotone: bool,
    pub corrected_monotone: bool,
    pub w1_decreasing: bool,
    pub annealed: Vec<AnnealedProbe>,
    pub discards: Discards,
}

impl MsdTable {
    pub fn csv_header() -> &'static str {
        "T,m2,stderr,deviation,corrected_deviation,marginal_w1,ramp_sup"
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::csv_header());
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.t, r.m2.mean, r.stderr, r.deviation, r.corrected_deviation, r.marginal_w1, r.ramp_sup
            ));
        }
        s
    }

    pub fn annealed_csv(&self) -> String {
        let mut s = String::from("T,radius,ratio,stderr\n");
        for a in &self.annealed {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", a.t, a.radius, a.ratio.mean, a.ratio.stderr));
        }
        s
    }
}

fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `∫|F(x) − Φ(x/σ)| dx` for point masses `mass[j]` at `x[j]` (increasing).
pub fn marginal_w1(x: &[f64], mass: &[f64], sigma: f64) -> f64 {
    const SUB: usize = 32;
    let cdf = |v: f64| normal_cdf(v / sigma);
    let first = x[0];
    let last = x[x.len() - 1];
    // tails: ∫_{-∞}^a Φ(x/σ) dx = aΦ(a/σ) + σφ(a/σ)
    let mut w = first * cdf(first) + sigma * normal_pdf(first / sigma);
    w += -last * (1.0 - cdf(last)) + sigma * normal_pdf(last / sigma);
    let mut acc = 0.0;
    for j in 0..x.len() - 1 {
        acc += mass[j];
        let h = (x[j + 1] - x[j]) / SUB as f64;
        for s in 0..SUB {
            let v = x[j] + (s as f64 + 0.5) * h;
            w += (acc - cdf(v)).abs() * h;
        }
    }
    w
}

/// Mean-square displacement, Wasserstein proxies and annealed ratios at
/// each time in `t_list` (increasing), from one nested ensemble.
pub fn msd_trend(runner: &SheRunner, t_list: &[f64], ramps: usize, annealed_times: &[f64]) -> Result<MsdTable> {
    let cfg = runner.config();
    let grid = cfg.grid;
    let d = grid.dim();
    let n = grid.points_per_axis();
    let vol = grid.cell_volume();
    if t_list.is_empty() || t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("times must be increasing".into()));
    }
    let mut times: Vec<f64> = t_list.iter().chain(annealed_times).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for &t in &times {
        cfg.steps_to(t)?;
    }
    let x2 = TestFunction::SquaredNorm.samples(&grid);
    let initial_m2 = crate::field::inner(&x2, runner.q0().values(), vol);
    let mut rng = cfg.rng.derive(0x5eed).stream(0);
    let ramp_fns: Vec<TestFunction> = (0..ramps)
        .map(|_| {
            let mut v = [0.0; 3];
            for c in v.iter_mut().take(d) {
                *c = rng.sample(StandardNormal);
            }
            let b: f64 = rng.random_range(-1.0..1.0);
            TestFunction::ramp(v, b, 1.0)
        })
        .collect::<Result<_>>()?;
    let ramp_targets: Vec<f64> = ramp_fns.iter().map(|r| r.heat_smoothed(1.0, &vec![0.0; d])).collect::<Result<_>>()?;
    let ramp_samples: Vec<Vec<Vec<f64>>> = t_list
        .iter()
        .map(|&t| {
            let s = t.sqrt();
            ramp_fns
                .iter()
                .map(|r| {
                    (0..grid.len())
                        .map(|i| {
                            let p = grid.position(i);
                            let y: Vec<f64> = p[..d].iter().map(|v| v / s).collect();
                            r.eval(&y)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let probes: Vec<(f64, usize, f64)> = annealed_times
        .iter()
        .flat_map(|&t| {
            let rmax = 2.0 * t.sqrt();
            (0..n / 2).map(move |j| j as f64 * grid.spacing()).filter(move |r| *r <= rmax).map(move |r| (t, r))
        })
        .map(|(t, r)| {
            let mut p = [0.0; 3];
            p[0] = r;
            (t, grid.index_of(&p[..d]).expect("probe on grid"), r)
        })
        .collect();
    let (samples, discards) = runner.run(|r| {
        let mut m2 = Vec::with_capacity(t_list.len());
        let mut marg = Vec::with_capacity(t_list.len());
        let mut rv = Vec::with_capacity(t_list.len());
        let mut ann = Vec::with_capacity(probes.len());
        for &t in &times {
            r.advance_to(t)?;
            let u = r.u();
            let z = pairwise_sum(u);
            for &(pt, idx, _) in &probes {
                if pt == t {
                    ann.push(u[idx] / (z * vol));
                }
            }
            if let Some(k) = t_list.iter().position(|&v| v == t) {
                let x2u: Vec<f64> = x2.iter().zip(u).map(|(a, b)| a * b).collect();
                m2.push(pairwise_sum(&x2u) / z);
                let mut m = vec![0.0; d * n];
                for (i, &v) in u.iter().enumerate() {
                    let idx = grid.unravel(i);
                    for a in 0..d {
                        m[a * n + idx[a]] += v / z;
                    }
                }
                marg.push(m);
                rv.push(
                    ramp_samples[k]
                        .iter()
                        .map(|rs| pairwise_sum(&rs.iter().zip(u).map(|(a, b)| a * b).collect::<Vec<_>>()) / z)
                        .collect::<Vec<f64>>(),
                );
            }
        }
        Ok((m2, marg, rv, ann))
    })?;
    let count = samples.len();
    if count < 2 {
        return Err(Error::Invariant("fewer than two valid realizations".into()));
    }
    let axis = grid.axis();
    let mut rows = Vec::with_capacity(t_list.len());
    for (k, &t) in t_list.iter().enumerate() {
        let m2v: Vec<f64> = samples.iter().map(|s| s.0[k]).collect();
        let m2 = McEstimate::from_samples(&m2v)?;
        let mut w1 = 0.0;
        for a in 0..d {
            let mass: Vec<f64> = (0..n)
                .map(|j| pairwise_sum(&samples.iter().map(|s| s.1[k][a * n + j]).collect::<Vec<_>>()) / count as f64)
                .collect();
            let scaled: Vec<f64> = axis.iter().map(|x| x / t.sqrt()).collect();
            w1 += marginal_w1(&scaled, &mass, 1.0);
        }
        let ramp_sup = (0..ramps)
            .map(|j| {
                let mean = pairwise_sum(&samples.iter().map(|s| s.2[k][j]).collect::<Vec<_>>()) / count as f64;
                (mean - ramp_targets[j]).abs()
            })
            .fold(0.0, f64::max);
        rows.push(MsdRow {
            t,
            deviation: (m2.mean / t - d as f64).abs(),
            corrected_deviation: ((m2.mean - initial_m2) / t - d as f64).abs(),
            stderr: m2.stderr / t,
            m2,
            marginal_w1: w1 / d as f64,
            ramp_sup,
        });
    }
    let nonincreasing = |dev: &dyn Fn(&MsdRow) -> f64| {
        rows.windows(2).all(|w| dev(&w[1]) <= dev(&w[0]) + w[0].stderr.hypot(w[1].stderr))
    };
    let monotone = nonincreasing(&|r| r.deviation);
    let corrected_monotone = nonincreasing(&|r| r.corrected_deviation);
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let slope = log_slope(&ts, &rows.iter().map(|r| r.deviation).collect::<Vec<_>>());
    let corrected_slope = log_slope(&ts, &rows.iter().map(|r| r.corrected_deviation).collect::<Vec<_>>());
    let w1_decreasing = rows.first().zip(rows.last()).is_some_and(|(a, b)| b.marginal_w1 < a.marginal_w1);
    let annealed = probes
        .iter()
        .enumerate()
        .map(|(j, &(t, _, r))| {
            let g = heat_kernel(t, &[r, 0.0, 0.0][..d])?;
            let v: Vec<f64> = samples.iter().map(|s| s.3[j] / g).collect();
            Ok(AnnealedProbe { t, radius: r, ratio: McEstimate::from_samples(&v)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MsdTable {
        initial_m2,
        rows,
        slope,
        corrected_slope,
        monotone,
        corrected_monotone,
        w1_decreasing,
        annealed,
        discards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitialData;
    use crate::kernel::{make_kernel, MollifierSpec};

    fn grid1(n: usize, l: f64) -> Grid {
        Grid::new(1, l, n).unwrap()
    }

    #[test]
    fn half_laplacian_matches_finite_differences() {
        let fs = [
            TestFunction::gaussian(0.8),
            TestFunction::Gaussian { center: [0.3, -0.2, 0.1], width: 1.3 },
            TestFunction::SquaredNorm,
        ];
        let x = [0.4, -0.7, 0.25];
        for d in 1..=3 {
            for f in &fs {
                let exact = f.half_laplacian(&x[..d]);
                let e1 = (f.half_laplacian_lattice(&x[..d], 1e-2) - exact).abs();
                let e2 = (f.half_laplacian_lattice(&x[..d], 5e-3) - exact).abs();
                assert!(e1 < 1e-3, "{f:?} d={d}: {e1}");
                if e1 > 1e-9 {
                    assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{f:?} d={d}: not second order");
                }
            }
        }
    }

    fn smoothed_by_quadrature(f: &TestFunction, tau: f64, x: f64) -> f64 {
        let n = 20_000;
        let h = 16.0 / n as f64;
        (0..n)
            .map(|i| {
                let z = -8.0 + (i as f64 + 0.5) * h;
                f.eval(&[x + tau.sqrt() * z]) * normal_pdf(z) * h
            })
            .sum()
    }

    #[test]
    fn heat_smoothing_closed_forms_match_quadrature() {
        let fs = [
            TestFunction::gaussian(0.7),
            TestFunction::SquaredNorm,
            TestFunction::ramp([1.0, 0.0, 0.0], 0.3, 0.8).unwrap(),
            TestFunction::ramp([-1.0, 0.0, 0.0], -0.5, 2.0).unwrap(),
        ];
        for f in &fs {
            for &(tau, x) in &[(0.5, 0.0), (1.0, 1.2), (2.5, -0.9)] {
                let a = f.heat_smoothed(tau, &[x]).unwrap();
                let b = smoothed_by_quadrature(f, tau, x);
                assert!((a - b).abs() < 1e-7, "{f:?} τ={tau} x={x}: {a} vs {b}");
            }
        }
        assert!(TestFunction::Constant.heat_smoothed(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn backward_heat_of_squared_norm() {
        let eps = 0.3;
        for d in 1..=3 {
            let x = [1.5, -0.5, 2.0];
            let r2: f64 = x[..d].iter().map(|v| v * v).sum();
            for t in [0.0, 2.0, 1.0 / (eps * eps)] {
                let v = backward_heat_f(&TestFunction::SquaredNorm, eps, t, &x[..d]).unwrap();
                let expect = eps * eps * r2 + (1.0 - eps * eps * t) * d as f64;
                assert!((v - expect).abs() < 1e-12);
            }
        }
        assert!(backward_heat_f(&TestFunction::SquaredNorm, eps, 12.0, &[0.0]).is_err());
    }

    #[test]
    fn backward_heat_terminal_value() {
        let h = TestFunction::gaussian(0.9);
        let eps = 0.5;
        let v = backward_heat_f(&h, eps, 4.0, &[1.3]).unwrap();
        assert_eq!(v, h.eval(&[0.65]));
    }

    #[test]
    fn backward_heat_of_ramp_is_eps_lipschitz() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let eps = 0.4;
        for _ in 0..500 {
            let dir = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let h = TestFunction::ramp(dir, rng.random_range(-1.0..1.0), 1.0).unwrap();
            let t = rng.random_range(0.0..1.0 / (eps * eps));
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let diff = (backward_heat_f(&h, eps, t, &x).unwrap() - backward_heat_f(&h, eps, t, &y).unwrap()).abs();
            assert!(diff <= eps * dist * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn simpson_and_trapezoid_weights() {
        let w = node_weights(8, 0.25);
        let s: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 * 0.25).powi(3)).sum();
        assert!((s - 4.0).abs() < 1e-13);
        let w = node_weights(3, 0.5);
        let s: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 * 0.5)).sum();
        assert!((s - 1.125).abs() < 1e-14);
    }

    fn synthetic(grid: &Grid) -> Vec<f64> {
        let q = DensityField::from_fn(*grid, 0.0, |x| (1.0 + 0.5 * (2.0 * x[0]).sin()) * (-x[0] * x[0] / 3.0).exp())
            .unwrap();
        q.normalized().unwrap().into_values()
    }

    #[test]
    fn coupling_terms_for_one_point() {
        let g = grid1(64, 6.0);
        let q = synthetic(&g);
        let mut ws = Workspace::new();
        for k in [CovarianceKernel::dirac(&g).unwrap(), make_kernel(MollifierSpec::smooth(1.0), &g).unwrap()] {
            let f = TestFunction::gaussian(1.2).samples(&g);
            assert_eq!(fkr_value(&f, 0, &q, &k, &mut ws).unwrap(), 0.0);
            let one = TestFunction::Constant.samples(&g);
            let a = fkr_value(&one, 1, &q, &k, &mut ws).unwrap();
            let b = fkr_value(&one, 2, &q, &k, &mut ws).unwrap();
            assert_eq!(a + b, 0.0);
            assert!(a < 0.0 && b > 0.0);

            // brute-force double loop over the periodic covariance
            let r = k.covariance();
            let n = g.len();
            let dx = g.spacing();
            let mut brute = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let lag = (i + n + n / 2 - j) % n;
                    brute -= f[i] * r[lag] * q[i] * q[j] * dx * dx;
                }
            }
            let v = fkr_value(&f, 1, &q, &k, &mut ws).unwrap();
            assert!((v - brute).abs() < 1e-12, "{v} vs {brute}");
        }
    }

    #[test]
    fn coupling_prefactors_have_opposite_signs() {
        let g = grid1(64, 6.0);
        let k = make_kernel(MollifierSpec::smooth(1.5), &g).unwrap();
        let q = synthetic(&g);
        let mut ws = Workspace::new();
        let one = TestFunction::Constant.samples(&g);
        let a = fkr_value(&one, 1, &q, &k, &mut ws).unwrap();
        let b = fkr_value(&one, 2, &q, &k, &mut ws).unwrap();
        // n = 1: prefactors −1 and +1 on the same pairing
        assert_eq!(a, -b);
        // n = 2: −n·2 and n(n+1)/2 give −4 : 3
        assert!(((-4.0 * b) / (3.0 * b) + 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn generator_rhs_for_unit_gaussian() {
        let g = grid1(256, 12.0);
        let q0 = InitialData::Gaussian { variance: 1.0 }.build(&g).unwrap();
        let k = CovarianceKernel::dirac(&g).unwrap();
        let f = TestFunction::SquaredNorm;
        let diffusion = generator_rhs(&f, &q0, 0.0, &k).unwrap();
        assert!((diffusion - 1.0).abs() < 1e-12);
        let full = generator_rhs(&f, &q0, 1.0, &k).unwrap();
        // ‖G_1‖² − ∫x²G_1² = 1/(2√π) − 1/(4√π)
        assert!((full - 1.0 - 0.141047395886939).abs() < 1e-10, "{full}");
        let half = generator_rhs(&f, &q0, 0.5, &k).unwrap();
        assert!((half - 1.035261848971735).abs() < 1e-10);
    }

    #[test]
    fn t_operator_has_zero_integral_and_fixes_plateaus() {
        let g = grid1(512, 8.0);
        for q in [
            InitialData::Gaussian { variance: 0.6 }.build(&g).unwrap(),
            InitialData::Plateau { height: 1.0, edge: 0.05 }.build(&g).unwrap(),
        ] {
            for k in [CovarianceKernel::dirac(&g).unwrap(), make_kernel(MollifierSpec::smooth(0.5), &g).unwrap()] {
                let tq = t_operator(q.values(), &k);
                assert!(pairwise_sum(&tq).abs() * g.spacing() < 1e-14);
            }
        }
        // smoothed edges lower ‖q‖² by a few edge widths
        let q = InitialData::Plateau { height: 1.0, edge: 0.01 }.build(&g).unwrap();
        let tq = t_operator(q.values(), &CovarianceKernel::dirac(&g).unwrap());
        let centre = g.index_of(&[0.0]).unwrap();
        for v in &tq[centre - 10..centre + 10] {
            assert!(v.abs() < 0.03, "{v}");
        }
    }

    #[test]
    fn generator_rhs_matches_the_reaction_diffusion_field() {
        let g = grid1(256, 12.0);
        let q0 = InitialData::Gaussian { variance: 1.3 }.build(&g).unwrap();
        let f = TestFunction::gaussian(1.5);
        for k in [CovarianceKernel::dirac(&g).unwrap(), make_kernel(MollifierSpec::smooth(1.0), &g).unwrap()] {
            let a = generator_rhs(&f, &q0, 0.7, &k).unwrap();
            let field = crate::rd::rhs(&q0, 0.7, &k);
            let b = crate::field::inner(&f.samples(&g), &field, g.spacing());
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn squared_norm_error_integrand_reduces_to_a_difference_of_squares() {
        let g = grid1(32, 5.0);
        let k = make_kernel(MollifierSpec::smooth(1.0), &g).unwrap();
        let q = synthetic(&g);
        let (eps, t) = (0.5, 1.5);
        let fe: Vec<f64> = (0..g.len())
            .map(|i| backward_heat_f(&TestFunction::SquaredNorm, eps, t, &[g.coordinate(i)]).unwrap())
            .collect();
        let mut ws = Workspace::new();
        let p = Pairing::new(&q, &k, g.spacing(), &mut ws);
        let general = p.linear(&fe, &q) * p.energy() - p.weighted(&fe);
        let r = k.covariance();
        let n = g.len();
        let dx = g.spacing();
        let mut triple = 0.0;
        for x in 0..n {
            for y in 0..n {
                let xy = g.coordinate(x).powi(2) - g.coordinate(y).powi(2);
                for z in 0..n {
                    let lag = (y + n + n / 2 - z) % n;
                    triple += xy * r[lag] * q[x] * q[y] * q[z];
                }
            }
        }
        triple *= eps * eps * dx * dx * dx;
        assert!((general - triple).abs() < 1e-12, "{general} vs {triple}");
    }

    #[test]
    fn marginal_wasserstein_of_gaussians() {
        let x: Vec<f64> = (0..801).map(|i| -8.0 + 0.02 * i as f64).collect();
        let shift = 0.3;
        let mass: Vec<f64> = x.iter().map(|v| normal_pdf(v - shift) * 0.02).collect();
        let w = marginal_w1(&x, &mass, 1.0);
        assert!((w - shift).abs() < 2e-2, "{w}");
        let mass: Vec<f64> = x.iter().map(|v| normal_pdf(*v) * 0.02).collect();
        assert!(marginal_w1(&x, &mass, 1.0) < 2e-2);
    }

    #[test]
    fn parses_test_functions() {
        assert_eq!(TestFunction::parse("one").unwrap(), TestFunction::Constant);
        assert_eq!(TestFunction::parse("x2").unwrap(), TestFunction::SquaredNorm);
        assert_eq!(TestFunction::parse("gauss:0.5").unwrap(), TestFunction::gaussian(0.5));
        assert!(
            matches!(TestFunction::parse("ramp:3,4:0.1:1").unwrap(), TestFunction::Ramp { direction, .. } if (direction[0] - 0.6).abs() < 1e-15)
        );
        assert!(TestFunction::parse("gauss:-1").is_err());
        assert!(TestFunction::parse("cubic").is_err());
    }
}
