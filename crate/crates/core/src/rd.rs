//! Strang-split solver for `∂_t g = ½Δg + β²(⟨R⋆g, g⟩ g − g R⋆g)`.
//!
//! With the Dirac kernel the reaction is the logistic flow
//! `g' = β²(E g − g²)`, `E = ∫g²`, solved in closed form. The carrying
//! level `E` is held constant within each reaction substep at the value
//! that makes the substep conserve mass exactly. Other kernels use a
//! classical four-stage Runge–Kutta reaction.
//!
//! Far from the bulk the linearized reaction grows like `exp(∫E dt)`, which
//! amplifies the floating-point floor left by the FFT. For the Dirac kernel
//! values below `tail_cutoff · max g` are therefore set to zero after each
//! diffusion substep, and the reaction level targets the initial mass so
//! the removed floor is returned to the bulk.

use crate::diagnostics::{med_with, moment_values};
use crate::error::{Error, Result};
use crate::field::{clamp_ringing, inner, pairwise_sum, DensityField, LEAKAGE_LIMIT};
use crate::grid::Grid;
use crate::kernel::CovarianceKernel;
use crate::spectral::{HeatSymbol, Spectral, Workspace};

/// Default bound on `dt·β²·sup(R⋆g)`.
pub const REACTION_BUDGET: f64 = 0.1;

/// Largest clamped ringing mass accepted in one step.
pub const CLAMP_LIMIT: f64 = 1e-12;

/// Default relative level below which tail values are set to zero.
pub const TAIL_CUTOFF: f64 = 1e-14;

/// Step-size control that keeps `dt·β²·sup(R⋆g)` at the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStep {
    pub dt_max: f64,
}

#[derive(Debug, Clone)]
pub struct RdConfig {
    pub beta: f64,
    pub kernel: CovarianceKernel,
    pub grid: Grid,
    /// Fixed step, or the smallest step when `adaptive` is set.
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    /// Extra times at which a diagnostic row is recorded.
    pub diagnostic_times: Vec<f64>,
    /// Record a row every `cadence` steps; zero disables.
    pub cadence: usize,
    pub budget: f64,
    pub adaptive: Option<AdaptiveStep>,
    pub heat: HeatSymbol,
    /// Relative tail cutoff; zero disables.
    pub tail_cutoff: f64,
}

impl RdConfig {
    pub fn new(beta: f64, kernel: CovarianceKernel, dt: f64, t_final: f64) -> Self {
        let grid = *kernel.grid();
        Self {
            beta,
            kernel,
            grid,
            dt,
            t_final,
            snapshot_times: Vec::new(),
            diagnostic_times: Vec::new(),
            cadence: 1,
            budget: REACTION_BUDGET,
            adaptive: None,
            heat: HeatSymbol::Continuum,
            tail_cutoff: TAIL_CUTOFF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("T must be >= 0, got {}", self.t_final)));
        }
        if *self.kernel.grid() != self.grid {
            return Err(Error::Config("kernel was built on a different grid".into()));
        }
        if !(self.tail_cutoff >= 0.0 && self.tail_cutoff < 1e-6) {
            return Err(Error::Config(format!("tail cutoff {} outside [0, 1e-6)", self.tail_cutoff)));
        }
        if !(self.budget > 0.0) {
            return Err(Error::Config("reaction budget must be positive".into()));
        }
        for &t in self.snapshot_times.iter().chain(&self.diagnostic_times) {
            if !(t >= 0.0 && t <= self.t_final) {
                return Err(Error::Config(format!("requested time {t} outside [0, {}]", self.t_final)));
            }
        }
        if let Some(a) = self.adaptive {
            if !(a.dt_max >= self.dt) {
                return Err(Error::Config("adaptive dt_max must be >= dt".into()));
            }
        }
        Ok(())
    }

    /// Domain half-width recommended for spreading like `t^{2/3}`.
    pub fn recommended_half_width(&self) -> f64 {
        10.0 * self.t_final.powf(2.0 / 3.0)
    }
}

/// One diagnostic row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub m: f64,
    pub e: f64,
    pub d: f64,
    pub mass: f64,
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
    /// Ringing mass clamped since the start of the run.
    pub clamped_mass: f64,
    pub leakage: f64,
}

impl DiagnosticRow {
    pub fn csv_row(&self) -> String {
        let v = [self.t, self.m, self.e, self.d, self.mass, self.m1, self.m2, self.m4, self.clamped_mass, self.leakage];
        v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
    }
}

/// Rows with strictly increasing `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticSeries {
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticSeries {
    pub const CSV_HEADER: &'static str = "t,M,E,D,mass,m1,m2,m4,clamped_mass,leakage";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    fn push(&mut self, row: DiagnosticRow) {
        match self.rows.last_mut() {
            Some(last) if last.t == row.t => *last = row,
            _ => self.rows.push(row),
        }
    }

    /// `(t, column)` pairs for fitting.
    pub fn column(&self, f: impl Fn(&DiagnosticRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, f(r))).collect()
    }
}

/// Successful run output.
#[derive(Debug, Clone)]
pub struct RdRun {
    pub series: DiagnosticSeries,
    pub snapshots: Vec<DensityField>,
    pub final_state: DensityField,
    pub steps: usize,
    /// Mass removed by the tail cutoff and returned through the reaction.
    pub cut_mass: f64,
    pub warnings: Vec<String>,
}

/// Aborted run: the error, the last state that passed all checks, and the
/// rows recorded so far.
#[derive(Debug)]
pub struct RdFailure {
    pub error: Error,
    pub last_good: DensityField,
    pub series: DiagnosticSeries,
}

impl std::fmt::Display for RdFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (last good state at t = {})", self.error, self.last_good.time())
    }
}

impl std::error::Error for RdFailure {}

/// Exact solution of `g' = β²(E g − g²)` over `dt` at frozen `E`.
pub fn reaction_substep(g: &DensityField, e: f64, beta: f64, dt: f64) -> Result<DensityField> {
    if !(e >= 0.0 && dt > 0.0) {
        return Err(Error::Domain(format!("reaction substep needs E >= 0 and dt > 0, got E={e}, dt={dt}")));
    }
    let kappa = beta * beta * dt;
    let values = g.values().iter().map(|&v| logistic(v, e, kappa)).collect();
    DensityField::new(*g.grid(), values, g.time() + dt)
}

#[inline]
fn logistic(g: f64, e: f64, kappa: f64) -> f64 {
    if e == 0.0 {
        return g / (1.0 + kappa * g);
    }
    let em = (kappa * e).exp_m1();
    e * g * (1.0 + em) / (e + g * em)
}

/// `(Φ, ∂Φ/∂E)` for the logistic map at level `e`.
#[inline]
fn logistic_with_slope(g: f64, e: f64, kappa: f64) -> (f64, f64) {
    let a = kappa * e;
    let em = a.exp_m1();
    let ex = 1.0 + em;
    let den = e + g * em;
    if den == 0.0 {
        return (0.0, 0.0);
    }
    let num = e * g * ex;
    let dnum = g * ex * (1.0 + a);
    let dden = 1.0 + g * kappa * ex;
    (num / den, (dnum * den - num * dden) / (den * den))
}

/// Level `E*` at which the logistic substep maps `values` to cell sum `target`.
fn conserving_level(values: &[f64], kappa: f64, e0: f64, target: f64) -> f64 {
    if target == 0.0 || kappa == 0.0 {
        return e0;
    }
    let mut e = e0.max(f64::MIN_POSITIVE);
    let mut phi = vec![0.0; values.len()];
    let mut dphi = vec![0.0; values.len()];
    for _ in 0..60 {
        for (i, &g) in values.iter().enumerate() {
            let (p, dp) = logistic_with_slope(g, e, kappa);
            phi[i] = p;
            dphi[i] = dp;
        }
        let f = pairwise_sum(&phi) - target;
        let df = pairwise_sum(&dphi);
        if !(df > 0.0) {
            break;
        }
        let step = f / df;
        let next = (e - step).max(0.5 * e);
        let done = (next - e).abs() <= 4.0 * f64::EPSILON * e;
        e = next;
        if done || f.abs() <= 2.0 * f64::EPSILON * target {
            break;
        }
    }
    e
}

/// Advances fields by one Strang step; reuses FFT plans and buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    beta: f64,
    kernel: CovarianceKernel,
    spectral: Spectral,
    ws: Workspace,
    symbol: HeatSymbol,
    heat_dt: f64,
    heat: Vec<f64>,
    tail_cutoff: f64,
    target_sum: Option<f64>,
    cut_mass: f64,
}

impl Stepper {
    pub fn new(beta: f64, kernel: &CovarianceKernel, symbol: HeatSymbol) -> Self {
        let spectral = Spectral::new(kernel.grid());
        Self {
            beta,
            kernel: kernel.clone(),
            spectral,
            ws: Workspace::new(),
            symbol,
            heat_dt: f64::NAN,
            heat: Vec::new(),
            tail_cutoff: 0.0,
            target_sum: None,
            cut_mass: 0.0,
        }
    }

    /// Enables the tail cutoff and pins the reaction to the given mass.
    pub fn with_tail_cutoff(mut self, cutoff: f64, mass: f64) -> Self {
        if self.kernel.is_dirac() && self.beta > 0.0 && cutoff > 0.0 {
            self.tail_cutoff = cutoff;
            self.target_sum = Some(mass / self.spectral.grid().cell_volume());
        }
        self
    }

    /// Mass removed by the tail cutoff so far.
    pub fn cut_mass(&self) -> f64 {
        self.cut_mass
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Largest reaction rate `β² sup(R⋆g)`.
    pub fn reaction_rate(&mut self, values: &[f64]) -> f64 {
        let sup = if self.kernel.is_dirac() {
            values.iter().copied().fold(0.0, f64::max)
        } else {
            self.kernel.convolve(values, &mut self.ws).into_iter().fold(0.0, f64::max)
        };
        self.beta * self.beta * sup
    }

    fn half_reaction(&mut self, values: &mut [f64], h: f64) {
        if self.beta == 0.0 {
            return;
        }
        let vol = self.spectral.grid().cell_volume();
        let kappa = self.beta * self.beta * h;
        if self.kernel.is_dirac() {
            let e0 = inner(values, values, vol);
            let target = self.target_sum.unwrap_or_else(|| pairwise_sum(values));
            let e = conserving_level(values, kappa, e0, target);
            for v in values.iter_mut() {
                *v = logistic(*v, e, kappa);
            }
        } else {
            let y0 = values.to_vec();
            let k1 = self.nonlocal_field(&y0);
            let y1: Vec<f64> = y0.iter().zip(&k1).map(|(y, k)| y + 0.5 * h * k).collect();
            let k2 = self.nonlocal_field(&y1);
            let y2: Vec<f64> = y0.iter().zip(&k2).map(|(y, k)| y + 0.5 * h * k).collect();
            let k3 = self.nonlocal_field(&y2);
            let y3: Vec<f64> = y0.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
            let k4 = self.nonlocal_field(&y3);
            for i in 0..values.len() {
                values[i] = y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }

    /// `β²(⟨R⋆g, g⟩ g − g R⋆g)`.
    fn nonlocal_field(&mut self, g: &[f64]) -> Vec<f64> {
        let vol = self.spectral.grid().cell_volume();
        let rg = self.kernel.convolve(g, &mut self.ws);
        let pair = inner(&rg, g, vol);
        let b2 = self.beta * self.beta;
        g.iter().zip(&rg).map(|(gi, ri)| b2 * gi * (pair - ri)).collect()
    }

    /// One Strang step of size `dt`; returns the clamped ringing mass.
    pub fn advance(&mut self, values: &mut [f64], dt: f64) -> Result<f64> {
        self.half_reaction(values, 0.5 * dt);
        if self.heat_dt != dt {
            self.heat = self.spectral.heat_multiplier_with(self.symbol, dt);
            self.heat_dt = dt;
        }
        self.spectral.apply_real(values, &self.heat, &mut self.ws);
        let clamped = clamp_ringing(values, self.spectral.grid().cell_volume())?;
        if self.tail_cutoff > 0.0 {
            let floor = self.tail_cutoff * values.iter().copied().fold(0.0, f64::max);
            let mut cut = 0.0;
            for v in values.iter_mut() {
                if *v < floor {
                    cut += *v;
                    *v = 0.0;
                }
            }
            self.cut_mass += cut * self.spectral.grid().cell_volume();
        }
        self.half_reaction(values, 0.5 * dt);
        let clamped2 = clamp_ringing(values, self.spectral.grid().cell_volume())?;
        Ok(clamped + clamped2)
    }

    fn row(&mut self, values: &[f64], t: f64, clamped: f64, leakage: f64) -> DiagnosticRow {
        let grid = *self.spectral.grid();
        let med = med_with(values, &self.spectral, &mut self.ws);
        DiagnosticRow {
            t,
            m: med.m,
            e: med.e,
            d: med.d,
            mass: pairwise_sum(values) * grid.cell_volume(),
            m1: moment_values(values, &grid, 1.0),
            m2: moment_values(values, &grid, 2.0),
            m4: moment_values(values, &grid, 4.0),
            clamped_mass: clamped,
            leakage,
        }
    }
}

/// Single step with the configured `dt`.
pub fn step(state: &DensityField, cfg: &RdConfig) -> Result<DensityField> {
    cfg.validate()?;
    let mut stepper = Stepper::new(cfg.beta, &cfg.kernel, cfg.heat).with_tail_cutoff(cfg.tail_cutoff, state.mass());
    let mut values = state.values().to_vec();
    let clamped = stepper.advance(&mut values, cfg.dt)?;
    if clamped > CLAMP_LIMIT {
        return Err(Error::Invariant(format!("clamped ringing mass {clamped:.3e} in one step")));
    }
    let next = DensityField::new(*state.grid(), values, state.time() + cfg.dt)?;
    let leak = next.leakage();
    if leak >= LEAKAGE_LIMIT {
        return Err(Error::Leakage { t: next.time(), mass: leak });
    }
    Ok(next)
}

/// `½Δg + β²(⟨R⋆g, g⟩ g − g R⋆g)` evaluated spectrally.
pub fn rhs(g: &DensityField, beta: f64, kernel: &CovarianceKernel) -> Vec<f64> {
    let mut stepper = Stepper::new(beta, kernel, HeatSymbol::Continuum);
    let lap = stepper.spectral.laplacian(g.values(), &mut stepper.ws);
    let reaction = stepper.nonlocal_field(g.values());
    lap.iter().zip(&reaction).map(|(l, r)| 0.5 * l + r).collect()
}

/// Integrates from `q0` to `T_final`.
pub fn run(cfg: &RdConfig, q0: &DensityField) -> std::result::Result<RdRun, RdFailure> {
    let fail = |error: Error, last: &DensityField, series: &DiagnosticSeries| RdFailure {
        error,
        last_good: last.clone(),
        series: series.clone(),
    };
    let mut series = DiagnosticSeries::default();
    if let Err(e) = cfg.validate() {
        return Err(fail(e, q0, &series));
    }
    if *q0.grid() != cfg.grid {
        return Err(fail(Error::Config("initial data lives on a different grid".into()), q0, &series));
    }
    let mut warnings = Vec::new();
    if cfg.grid.half_width() < cfg.recommended_half_width() {
        warnings.push(format!(
            "half-width {} is below the recommended {:.4e}",
            cfg.grid.half_width(),
            cfg.recommended_half_width()
        ));
    }

    let mut stepper = Stepper::new(cfg.beta, &cfg.kernel, cfg.heat).with_tail_cutoff(cfg.tail_cutoff, q0.mass());
    let initial_rate = stepper.reaction_rate(q0.values());
    if cfg.dt * initial_rate > cfg.budget * (1.0 + 1e-12) {
        return Err(fail(
            Error::Config(format!(
                "dt·β²·sup(R⋆q0) = {:.4} exceeds the reaction budget {}",
                cfg.dt * initial_rate,
                cfg.budget
            )),
            q0,
            &series,
        ));
    }

    let mut events: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .chain(&cfg.diagnostic_times)
        .copied()
        .chain(std::iter::once(cfg.t_final))
        .filter(|&t| t > q0.time())
        .collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let is_snapshot = |t: f64| cfg.snapshot_times.contains(&t);

    let mut values = q0.values().to_vec();
    let mut t = q0.time();
    let mut clamped_total = 0.0;
    let mut snapshots = Vec::new();
    series.push(stepper.row(&values, t, 0.0, q0.leakage()));
    if is_snapshot(t) {
        snapshots.push(q0.clone());
    }
    let mut last_good = q0.clone();
    let mut steps = 0usize;
    let mut next_event = 0usize;

    while next_event < events.len() {
        let target = events[next_event];
        let mut dt = match cfg.adaptive {
            Some(a) => {
                let rate = stepper.reaction_rate(&values);
                if rate > 0.0 {
                    (cfg.budget / rate).clamp(cfg.dt, a.dt_max)
                } else {
                    a.dt_max
                }
            }
            None => cfg.dt,
        };
        let hit = t + dt >= target * (1.0 - 1e-12);
        if hit {
            dt = target - t;
        }
        let clamped = match stepper.advance(&mut values, dt) {
            Ok(c) => c,
            Err(e) => return Err(fail(e, &last_good, &series)),
        };
        steps += 1;
        t = if hit { target } else { t + dt };
        clamped_total += clamped;
        if clamped > CLAMP_LIMIT {
            let e = Error::Invariant(format!("clamped ringing mass {clamped:.3e} at t = {t}"));
            return Err(fail(e, &last_good, &series));
        }
        let state = match DensityField::new(cfg.grid, values.clone(), t) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, &last_good, &series)),
        };
        let leak = state.leakage();
        if leak >= LEAKAGE_LIMIT {
            return Err(fail(Error::Leakage { t, mass: leak }, &last_good, &series));
        }
        if hit || (cfg.cadence > 0 && steps.is_multiple_of(cfg.cadence)) {
            series.push(stepper.row(&values, t, clamped_total, leak));
        }
        if hit {
            if is_snapshot(t) {
                snapshots.push(state.clone());
            }
            next_event += 1;
        }
        last_good = state;
    }
    let cut_mass = stepper.cut_mass();
    Ok(RdRun { series, snapshots, final_state: last_good, steps, cut_mass, warnings })
}

/// Maps a field of the `β` equation to the `β = 1` equation via
/// `ḡ(t, x) = β⁻² g(t β⁻⁴, x β⁻²)`; the grid shrinks by `β²`.
pub fn rescale_to_unit_beta(g: &DensityField, beta: f64) -> Result<DensityField> {
    if g.grid().dim() != 1 {
        return Err(Error::Inapplicable("the rescaling identity is one-dimensional".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("rescaling needs beta > 0, got {beta}")));
    }
    let b2 = beta * beta;
    let grid = g.grid().rescaled(b2)?;
    let values = g.values().iter().map(|v| v / b2).collect();
    DensityField::new(grid, values, g.time() * b2 * b2)
}
