//! Spatial covariance kernels `R = φ ⋆ φ(-·)` of the driving noise.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::inner;
use crate::grid::Grid;
use crate::spectral::{Spectral, Workspace};

/// Shape of the mollifier `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpFamily {
    /// Indicator of the cube `[-w/2, w/2)^d`.
    Box,
    /// Radial `exp(-1/(1 - (2r/w)²))` on the ball of diameter `w`.
    Smooth,
}

/// Mollifier family plus support diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub family: BumpFamily,
    pub width: f64,
}

impl MollifierSpec {
    pub fn smooth(width: f64) -> Self {
        Self { family: BumpFamily::Smooth, width }
    }

    pub fn boxcar(width: f64) -> Self {
        Self { family: BumpFamily::Box, width }
    }

    /// Unnormalized profile at position `x`.
    pub fn profile(&self, x: &[f64]) -> f64 {
        let h = 0.5 * self.width;
        match self.family {
            BumpFamily::Box => {
                if x.iter().all(|&v| v >= -h && v < h) {
                    1.0
                } else {
                    0.0
                }
            }
            BumpFamily::Smooth => {
                let s2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (h * h);
                if s2 < 1.0 {
                    (-1.0 / (1.0 - s2)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Covariance of the noise: lattice white noise in `d = 1`, or the
/// autocorrelation of a compactly supported mollifier.
#[derive(Debug, Clone)]
pub enum CovarianceKernel {
    Dirac(Grid),
    Smooth(Box<SmoothKernel>),
}

/// Mollifier samples with the derived covariance and their spectra.
#[derive(Debug, Clone)]
pub struct SmoothKernel {
    spec: MollifierSpec,
    spectral: Spectral,
    phi: Vec<f64>,
    r: Vec<f64>,
    phi_hat: Vec<Complex64>,
    r_hat: Vec<f64>,
}

/// Builds the covariance kernel generated by `spec` on `grid`.
pub fn make_kernel(spec: MollifierSpec, grid: &Grid) -> Result<CovarianceKernel> {
    let dx = grid.spacing();
    if !(spec.width.is_finite() && spec.width >= 2.0 * dx) {
        return Err(Error::Config(format!(
            "mollifier width {} must be at least two grid spacings ({})",
            spec.width,
            2.0 * dx
        )));
    }
    if spec.width > grid.half_width() {
        return Err(Error::Config(format!(
            "mollifier width {} exceeds half the domain ({})",
            spec.width,
            grid.half_width()
        )));
    }
    let d = grid.dim();
    let vol = grid.cell_volume();
    let mut phi: Vec<f64> = (0..grid.len()).map(|i| spec.profile(&grid.position(i)[..d])).collect();
    let total: f64 = crate::field::pairwise_sum(&phi) * vol;
    for v in phi.iter_mut() {
        *v /= total;
    }

    let spectral = Spectral::new(grid);
    let mut ws = Workspace::new();
    let mut r = spectral.autocorrelation(&phi, &mut ws);
    let r0 = r[grid.origin_index()];
    for v in r.iter_mut() {
        if *v < 1e-14 * r0 {
            *v = 0.0;
        }
    }
    symmetrize(grid, &mut r);
    let phi_hat = spectral.kernel_spectrum(&phi, &mut ws);
    let r_hat = spectral.kernel_spectrum(&r, &mut ws).iter().map(|c| c.re).collect();
    Ok(CovarianceKernel::Smooth(Box::new(SmoothKernel { spec, spectral, phi, r, phi_hat, r_hat })))
}

fn symmetrize(grid: &Grid, r: &mut [f64]) {
    let n = grid.points_per_axis();
    let d = grid.dim();
    let src = r.to_vec();
    for (flat, v) in r.iter_mut().enumerate() {
        let idx = grid.unravel(flat);
        let mut mirror = [0usize; 3];
        for a in 0..d {
            mirror[a] = (n - idx[a]) % n;
        }
        let m = src[grid.ravel(&mirror)];
        *v = 0.5 * (src[flat] + m);
    }
}

impl CovarianceKernel {
    /// Lattice white noise; only defined in one dimension.
    pub fn dirac(grid: &Grid) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::Config(format!("the Dirac kernel is restricted to d = 1, got d = {}", grid.dim())));
        }
        Ok(Self::Dirac(*grid))
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Self::Dirac(g) => g,
            Self::Smooth(k) => k.spectral.grid(),
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, Self::Dirac(_))
    }

    /// Short identifier used in file headers.
    pub fn id(&self) -> String {
        match self {
            Self::Dirac(_) => "dirac".into(),
            Self::Smooth(k) => {
                let fam = match k.spec.family {
                    BumpFamily::Box => "box",
                    BumpFamily::Smooth => "bump",
                };
                format!("{fam}-w{}", k.spec.width)
            }
        }
    }

    pub fn mollifier(&self) -> Option<&MollifierSpec> {
        match self {
            Self::Dirac(_) => None,
            Self::Smooth(k) => Some(&k.spec),
        }
    }

    /// `R(0)`; for the lattice Dirac kernel this is `1/Δx`.
    pub fn r_origin(&self) -> f64 {
        match self {
            Self::Dirac(g) => 1.0 / g.spacing(),
            Self::Smooth(k) => k.r[k.spectral.grid().origin_index()],
        }
    }

    /// Covariance samples in centered layout.
    pub fn covariance(&self) -> Vec<f64> {
        match self {
            Self::Dirac(g) => {
                let mut r = vec![0.0; g.len()];
                r[g.origin_index()] = 1.0 / g.spacing();
                r
            }
            Self::Smooth(k) => k.r.clone(),
        }
    }

    /// Mollifier samples in centered layout, if any.
    pub fn mollifier_samples(&self) -> Option<&[f64]> {
        match self {
            Self::Dirac(_) => None,
            Self::Smooth(k) => Some(&k.phi),
        }
    }

    /// `R ⋆ g` by box-rule periodic convolution.
    pub fn convolve(&self, g: &[f64], ws: &mut Workspace) -> Vec<f64> {
        match self {
            Self::Dirac(_) => g.to_vec(),
            Self::Smooth(k) => {
                let mut out = g.to_vec();
                k.spectral.apply_real(&mut out, &k.r_hat, ws);
                out
            }
        }
    }

    /// `⟨R ⋆ g, g⟩`.
    pub fn pair(&self, g: &[f64], ws: &mut Workspace) -> f64 {
        let rg = self.convolve(g, ws);
        inner(&rg, g, self.grid().cell_volume())
    }

    /// Replaces white-noise cell increments by `φ ⋆ ξ`, in place.
    pub fn mollify(&self, xi: &mut [f64], ws: &mut Workspace) {
        if let Self::Smooth(k) = self {
            k.spectral.apply_complex(xi, &k.phi_hat, ws);
        }
    }
}
