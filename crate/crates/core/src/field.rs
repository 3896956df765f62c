//! Density fields on periodic grids and box-rule quadrature.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Largest boundary mass tolerated before a run is declared invalid.
pub const LEAKAGE_LIMIT: f64 = 1e-10;

/// Relative floor below which negative spectral ringing is clamped.
pub const RINGING_TOLERANCE: f64 = 1e-14;

/// Pairwise summation, independent of thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Pairwise sum of `f(i)` over `0..n`.
pub fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 32 {
            (lo..hi).map(f).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, f)
}

/// Box-rule inner product `Σ a_i b_i Δx^d`.
pub fn inner(a: &[f64], b: &[f64], cell_volume: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_by(a.len(), &|i| a[i] * b[i]) * cell_volume
}

/// Sets negative values above the ringing floor to zero and returns the
/// clamped mass. Values below the floor are an invariant violation.
pub fn clamp_ringing(values: &mut [f64], cell_volume: f64) -> Result<f64> {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = -RINGING_TOLERANCE * scale;
    let mut clamped = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < floor || !v.is_finite() {
                return Err(Error::Invariant(format!("negative density {v:.3e} below ringing floor")));
            }
            clamped -= *v;
            *v = 0.0;
        } else if !v.is_finite() {
            return Err(Error::Invariant("non-finite density value".into()));
        }
    }
    Ok(clamped * cell_volume)
}

/// Nonnegative samples of a density on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!("expected {} samples, got {}", grid.len(), values.len())));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::Domain(format!("time must be >= 0, got {time}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("density values must be finite and >= 0, found {v}")));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.position(i)[..d])).collect();
        Self::new(grid, values, time)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Box-rule integral of `f·g`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let d = self.grid.dim();
        let g = &self.grid;
        pairwise_sum_by(self.values.len(), &|i| f(&g.position(i)[..d]) * self.values[i]) * g.cell_volume()
    }

    /// Rescales to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("cannot normalize a field of mass {m}")));
        }
        for v in self.values.iter_mut() {
            *v /= m;
        }
        Ok(self)
    }

    /// Mass in cells within one spacing of the boundary.
    pub fn leakage(&self) -> f64 {
        let g = &self.grid;
        let s: f64 = (0..self.values.len()).filter(|&i| g.is_boundary_cell(i)).map(|i| self.values[i]).sum();
        s * g.cell_volume()
    }

    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        self.grid.index_of(x).map(|i| self.values[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_small_negatives_only() {
        let mut v = vec![1.0, -1e-16, 0.5, -5e-15];
        let m = clamp_ringing(&mut v, 0.5).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.5, 0.0]);
        assert!((m - 0.5 * (1e-16 + 5e-15)).abs() < 1e-30);
        let mut bad = vec![1.0, -1e-10];
        assert!(matches!(clamp_ringing(&mut bad, 1.0), Err(Error::Invariant(_))));
    }

    #[test]
    fn rejects_negative_values() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = -1.0;
        assert!(DensityField::new(g, v, 0.0).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
        assert_eq!(pairwise_sum_by(1000, &|i| v[i]), 499500.0);
    }

    #[test]
    fn leakage_counts_edge_cells() {
        let g = Grid::new(1, 8.0, 16).unwrap();
        let f = DensityField::new(g, vec![1.0; 16], 0.0).unwrap();
        assert_eq!(f.leakage(), 3.0);
    }
}
