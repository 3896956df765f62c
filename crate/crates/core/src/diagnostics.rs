//! Functionals of density fields and the inequality checkers built on them.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, pairwise_sum_by, DensityField, LEAKAGE_LIMIT};
use crate::grid::Grid;
use crate::spectral::{Spectral, Workspace};

/// Constant in the dissipation inequality `M - E ≥ M⁴ / (C D)`.
pub const DISSIPATION_CONSTANT: f64 = 81.0;

/// Envelope for `t^{2/3} M(t)`, namely `2·81^{1/3}` rounded up.
pub const MAX_DECAY_ENVELOPE: f64 = 8.66;

/// Maximum, energy and dissipation of a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Med {
    pub m: f64,
    pub e: f64,
    pub d: f64,
}

/// `M = max g`, `E = ∫g²`, `D = ∫|∇g|²` with a spectral gradient.
pub fn med(g: &DensityField) -> Med {
    let spectral = Spectral::new(g.grid());
    med_with(g.values(), &spectral, &mut Workspace::new())
}

pub(crate) fn med_with(values: &[f64], spectral: &Spectral, ws: &mut Workspace) -> Med {
    let grid = spectral.grid();
    let vol = grid.cell_volume();
    let m = values.iter().copied().fold(0.0, f64::max);
    let e = pairwise_sum_by(values.len(), &|i| values[i] * values[i]) * vol;
    let mut d = 0.0;
    for axis in 0..grid.dim() {
        let gx = spectral.derivative(values, axis, ws);
        d += pairwise_sum_by(gx.len(), &|i| gx[i] * gx[i]) * vol;
    }
    Med { m, e, d }
}

/// Absolute moment with a trust flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub value: f64,
    /// False when boundary leakage exceeds the limit.
    pub trusted: bool,
}

/// `∫|x|^p g` with `|x|` measured from the grid origin.
pub fn moment(g: &DensityField, p: f64) -> Result<Moment> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("moment order must be positive, got {p}")));
    }
    Ok(Moment { value: moment_values(g.values(), g.grid(), p), trusted: g.leakage() < LEAKAGE_LIMIT })
}

pub(crate) fn moment_values(values: &[f64], grid: &Grid, p: f64) -> f64 {
    let weight = |i: usize| {
        let r2 = grid.radius_sq(i);
        if p == 2.0 {
            r2
        } else {
            r2.powf(0.5 * p)
        }
    };
    pairwise_sum_by(values.len(), &|i| weight(i) * values[i]) * grid.cell_volume()
}

/// Outcome of one inequality `lhs ≥ rhs` evaluated with a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn new(name: &str, t: f64, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = lhs - rhs;
        Self { name: name.into(), t, lhs, rhs, margin, tolerance, pass: margin >= -tolerance }
    }

    pub fn csv_header() -> &'static str {
        "name,t,lhs,rhs,margin,pass"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e},{:.16e},{:.16e},{}", self.name, self.t, self.lhs, self.rhs, self.margin, self.pass)
    }
}

/// Dissipation inequality `M - E ≥ M⁴/(81 D)` with relative slack `1e-6`.
pub fn check_dissipation(g: &DensityField) -> Result<InequalityReport> {
    if g.grid().dim() != 1 {
        return Err(Error::Inapplicable("the dissipation inequality is one-dimensional".into()));
    }
    let Med { m, e, d } = med(g);
    dissipation_report(g.time(), m, e, d)
}

pub fn dissipation_report(t: f64, m: f64, e: f64, d: f64) -> Result<InequalityReport> {
    if !(d > 0.0) {
        return Err(Error::Inapplicable("dissipation D = 0 (constant field)".into()));
    }
    let rhs = m.powi(4) / (DISSIPATION_CONSTANT * d);
    Ok(InequalityReport::new("dissipation", t, m - e, rhs, 1e-6 * rhs))
}

/// `E ≤ M` for a unit-mass density.
pub fn energy_below_max(t: f64, m: f64, e: f64) -> InequalityReport {
    InequalityReport::new("energy_below_max", t, m, e, 1e-12)
}

/// Least-squares power-law fit in log-log coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub used: usize,
    /// Times of in-window rows dropped for nonpositive `y`.
    pub excluded: Vec<f64>,
}

/// Fits `log y = slope·log t + intercept` over rows with `t` in `window`.
pub fn fit_exponent(rows: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for &(t, y) in rows {
        if t >= window.0 && t <= window.1 && t > 0.0 {
            if y > 0.0 && y.is_finite() {
                pts.push((t.ln(), y.ln()));
            } else {
                excluded.push(t);
            }
        }
    }
    if pts.len() < 10 {
        return Err(Error::Domain(format!("need at least 10 rows in the window, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let xm = pairwise_sum(&xs) / n;
    let ym = pairwise_sum(&ys) / n;
    let sxx = pairwise_sum_by(pts.len(), &|i| (xs[i] - xm).powi(2));
    let sxy = pairwise_sum_by(pts.len(), &|i| (xs[i] - xm) * (ys[i] - ym));
    if !(sxx > 0.0) {
        return Err(Error::Domain("window contains a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr = pairwise_sum_by(pts.len(), &|i| (ys[i] - intercept - slope * xs[i]).powi(2));
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit { slope, intercept, stderr, used: pts.len(), excluded })
}

/// Minimum of `∫|x|^p g` over densities with `0 ≤ g ≤ λ`, attained by
/// `λ` times the indicator of the centered ball of volume `1/λ`.
pub fn minimizer_lower_bound(lambda: f64, p: f64, d: usize) -> Result<f64> {
    if !(lambda > 0.0 && p > 0.0) || !(1..=3).contains(&d) {
        return Err(Error::Domain(format!("invalid arguments λ={lambda}, p={p}, d={d}")));
    }
    let omega = unit_ball_volume(d);
    let df = d as f64;
    let rho = (lambda * omega).powf(-1.0 / df);
    Ok(lambda * df * omega * rho.powf(df + p) / (df + p))
}

fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

/// `∫|x|^p g ≥ min` for `g` bounded by its own maximum.
pub fn moment_lower_bound_report(t: f64, m: f64, p: f64, moment: f64, d: usize) -> Result<InequalityReport> {
    let bound = minimizer_lower_bound(m, p, d)?;
    Ok(InequalityReport::new(&format!("moment_lower_bound_p{p}"), t, moment, bound, 1e-6 * bound))
}

/// Points where `g ≥ BULK_FRACTION · max g` count as bulk.
pub const BULK_FRACTION: f64 = 1e-10;

/// Compares snapshots at `t ≥ 1` with `(C/√t)·exp(3C₀t^{1/3} − x²/2t)`,
/// with `C` calibrated on the snapshot at `t = 1`.
///
/// Works in log space on the bulk of each profile. Each report has
/// `lhs = min(log bound − log g)` and `rhs = 0`.
pub fn supersolution_check(snapshots: &[DensityField], c0: f64) -> Result<Vec<InequalityReport>> {
    let base = snapshots
        .iter()
        .find(|s| (s.time() - 1.0).abs() < 1e-12)
        .ok_or_else(|| Error::Domain("calibration needs a snapshot at t = 1".into()))?;
    if base.grid().dim() != 1 {
        return Err(Error::Inapplicable("the supersolution bound is one-dimensional".into()));
    }
    let bulk = |g: &DensityField| {
        let floor = BULK_FRACTION * g.max();
        let grid = *g.grid();
        g.values()
            .iter()
            .enumerate()
            .filter(move |(_, v)| **v >= floor && **v > 0.0)
            .map(move |(i, v)| (grid.coordinate(i), *v))
            .collect::<Vec<_>>()
    };
    let log_bound = |t: f64, x: f64| -0.5 * t.ln() + 3.0 * c0 * t.cbrt() - x * x / (2.0 * t);
    let log_c = bulk(base).iter().map(|&(x, v)| v.ln() - log_bound(1.0, x)).fold(f64::NEG_INFINITY, f64::max);
    Ok(snapshots
        .iter()
        .filter(|s| s.time() >= 1.0)
        .map(|s| {
            let t = s.time();
            let gap = bulk(s).iter().map(|&(x, v)| log_c + log_bound(t, x) - v.ln()).fold(f64::INFINITY, f64::min);
            InequalityReport::new("supersolution", t, gap, 0.0, 1e-12)
        })
        .collect())
}

/// Samples of `t^{2/3} g(t, t^{2/3} y)` as `(y, value)` pairs.
pub fn rescaled_profile(g: &DensityField) -> Result<Vec<(f64, f64)>> {
    if g.grid().dim() != 1 {
        return Err(Error::Inapplicable("profiles are one-dimensional".into()));
    }
    let t = g.time();
    if !(t > 0.0) {
        return Err(Error::Domain("profile needs t > 0".into()));
    }
    let s = t.powf(2.0 / 3.0);
    Ok(g.values().iter().enumerate().map(|(i, v)| (g.grid().coordinate(i) / s, s * v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::heat_kernel;

    fn gaussian(l: f64, n: usize, t: f64) -> DensityField {
        let g = Grid::new(1, l, n).unwrap();
        DensityField::from_fn(g, t, |x| heat_kernel(t, x).unwrap()).unwrap()
    }

    #[test]
    fn med_of_standard_gaussian() {
        let m = med(&gaussian(20.0, 1024, 1.0));
        assert!((m.m - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((m.e - 0.282_094_791_773_878_14).abs() < 1e-12);
        assert!((m.d - 0.141_047_395_886_939_07).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let g = gaussian(20.0, 1024, 1.0);
        assert!((moment(&g, 2.0).unwrap().value - 1.0).abs() < 1e-10);
        assert!((moment(&g, 4.0).unwrap().value - 3.0).abs() < 1e-8);
        let g = gaussian(30.0, 2048, 2.5);
        assert!((moment(&g, 2.0).unwrap().value - 2.5).abs() < 1e-10);
    }

    #[test]
    fn dissipation_on_standard_gaussian() {
        let r = check_dissipation(&gaussian(20.0, 1024, 1.0)).unwrap();
        assert!((r.lhs - 0.116_847_488_627_554_5).abs() < 1e-10);
        assert!((r.rhs - 0.002_217_124_964_508_23).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn constant_field_is_inapplicable() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let f = DensityField::new(g, vec![0.5; 16], 0.0).unwrap();
        assert!(matches!(check_dissipation(&f), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn fit_exact_power_law() {
        let rows: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let t = 10f64.powf(i as f64 / 10.0);
                (t, 3.0 * t.powf(4.0 / 3.0))
            })
            .collect();
        let f = fit_exponent(&rows, (1.0, 1e4)).unwrap();
        assert!((f.slope - 4.0 / 3.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-11);
        let flat: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, 2.0)).collect();
        assert!(fit_exponent(&flat, (1.0, 1e4)).unwrap().slope.abs() < 1e-14);
    }

    #[test]
    fn fit_reports_excluded_rows() {
        let mut rows: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64, i as f64)).collect();
        rows[4].1 = 0.0;
        rows[7].1 = -1.0;
        let f = fit_exponent(&rows, (1.0, 20.0)).unwrap();
        assert_eq!(f.excluded, vec![5.0, 8.0]);
        assert_eq!(f.used, 18);
        assert!(fit_exponent(&rows[..9], (0.0, 100.0)).is_err());
    }

    #[test]
    fn minimizer_bound_closed_form() {
        let v = minimizer_lower_bound(0.5, 2.0, 1).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let lam: f64 = 2.0;
        let p: f64 = 3.0;
        let expect = 2f64.powf(-p) / (p + 1.0) * lam.powf(-p);
        assert!((minimizer_lower_bound(lam, p, 1).unwrap() - expect).abs() < 1e-15);
    }
}
