//! Heat kernel and the exact spectral heat propagator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{clamp_ringing, DensityField};
use crate::spectral::{HeatSymbol, Spectral, Workspace};

/// `G_t(x) = (2πt)^{-d/2} exp(-|x|²/(2t))` with `d = x.len()`.
pub fn heat_kernel(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * t)).exp())
}

/// Solves `∂_t f = ½Δf` on the periodic grid for time `dt`.
pub fn heat_propagate(f: &DensityField, dt: f64) -> Result<DensityField> {
    let prop = HeatPropagator::new(f.grid(), dt)?;
    let mut values = f.values().to_vec();
    let mut ws = Workspace::new();
    prop.apply(&mut values, &mut ws)?;
    DensityField::new(*f.grid(), values, f.time() + dt)
}

/// Reusable heat step for a fixed grid and time increment.
#[derive(Debug, Clone)]
pub struct HeatPropagator {
    spectral: Spectral,
    dt: f64,
    multiplier: Vec<f64>,
}

impl HeatPropagator {
    pub fn new(grid: &crate::grid::Grid, dt: f64) -> Result<Self> {
        Self::with_spectral(Spectral::new(grid), dt)
    }

    /// Exact lattice heat semigroup; positivity preserving for any data.
    pub fn lattice(grid: &crate::grid::Grid, dt: f64) -> Result<Self> {
        Self::with_symbol(Spectral::new(grid), HeatSymbol::Lattice, dt)
    }

    pub fn with_spectral(spectral: Spectral, dt: f64) -> Result<Self> {
        Self::with_symbol(spectral, HeatSymbol::Continuum, dt)
    }

    pub fn with_symbol(spectral: Spectral, symbol: HeatSymbol, dt: f64) -> Result<Self> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("heat step needs dt >= 0, got {dt}")));
        }
        let multiplier = spectral.heat_multiplier_with(symbol, dt);
        Ok(Self { spectral, dt, multiplier })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Propagates `values` in place and returns the clamped ringing mass.
    pub fn apply(&self, values: &mut [f64], ws: &mut Workspace) -> Result<f64> {
        if self.dt == 0.0 {
            return Ok(0.0);
        }
        self.spectral.apply_real(values, &self.multiplier, ws);
        clamp_ringing(values, self.spectral.grid().cell_volume())
    }

    /// Propagates without clamping; for signed data such as test functions.
    pub fn apply_signed(&self, values: &mut [f64], ws: &mut Workspace) {
        if self.dt > 0.0 {
            self.spectral.apply_real(values, &self.multiplier, ws);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn kernel_at_origin() {
        let v = heat_kernel(1.0, &[0.0]).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(heat_kernel(0.0, &[0.0]).is_err());
        assert!(heat_kernel(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn kernel_normalization() {
        let g = Grid::new(1, 20.0, 1024).unwrap();
        let f = DensityField::from_fn(g, 1.0, |x| heat_kernel(1.0, x).unwrap()).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_step_is_identity() {
        let g = Grid::new(1, 4.0, 32).unwrap();
        let f = DensityField::from_fn(g, 0.0, |x| heat_kernel(0.3, x).unwrap()).unwrap();
        let h = heat_propagate(&f, 0.0).unwrap();
        assert_eq!(h.values(), f.values());
        assert!(heat_propagate(&f, -0.1).is_err());
    }
}
