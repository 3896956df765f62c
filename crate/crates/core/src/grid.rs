//! Periodic Cartesian grids on `[-L, L)^d`.

use crate::error::{Error, Result};

/// Uniform periodic grid with `N` points per axis on `[-L, L)^d`.
///
/// Points sit at `x_i = -L + i·Δx` for `i = 0..N`, so the origin is the
/// point with index `N/2` on every axis. Values are stored row-major with
/// the last axis contiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Config(format!("half-width must be positive, got {half_width}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::Config(format!("points per axis must be a power of two >= 16, got {points}")));
        }
        let total = points.checked_pow(dim as u32).ok_or_else(|| Error::Config("grid too large".into()))?;
        if total > 1 << 27 {
            return Err(Error::Config(format!("grid with {total} cells is too large")));
        }
        Ok(Self { dim, half_width, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of cells, `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Coordinates of one axis.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coordinate(i)).collect()
    }

    /// Per-axis indices of a flat index; unused axes are zero.
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.points + i)
    }

    /// Position of a flat index; unused axes are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    pub fn radius_sq(&self, flat: usize) -> f64 {
        self.position(flat).iter().map(|v| v * v).sum()
    }

    /// Flat index of the grid point at the origin.
    pub fn origin_index(&self) -> usize {
        self.ravel(&[self.points / 2; 3])
    }

    /// Flat index of the grid point at `x`, if `x` lies on the grid.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim {
            return None;
        }
        let dx = self.spacing();
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            let s = (x[a] + self.half_width) / dx;
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r >= self.points as f64 {
                return None;
            }
            idx[a] = r as usize;
        }
        Some(self.ravel(&idx))
    }

    /// Flat indices of cells within one spacing of the outer boundary.
    pub fn is_boundary_cell(&self, flat: usize) -> bool {
        let idx = self.unravel(flat);
        (0..self.dim).any(|a| idx[a] <= 1 || idx[a] == self.points - 1)
    }

    /// Scaled copy of the grid with the same point count.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.half_width * factor, self.points)
    }
}
