//! Centered unit-mass initial densities.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::grid::Grid;
use crate::kernel::MollifierSpec;

/// Initial density, always normalized on the grid it is built on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// Smooth compactly supported bump of the given support diameter.
    Bump { width: f64 },
    /// Smooth bump four grid spacings wide, standing in for a point mass.
    DeltaBump,
    /// Centered Gaussian with the given per-axis variance.
    Gaussian { variance: f64 },
    /// Smoothed indicator of `[-1/(2h), 1/(2h)]^d` with height `h`.
    Plateau { height: f64, edge: f64 },
}

impl InitialData {
    pub fn build(&self, grid: &Grid) -> Result<DensityField> {
        let field = match *self {
            Self::Bump { width } => {
                if !(width >= 2.0 * grid.spacing() && width < grid.half_width()) {
                    return Err(Error::Config(format!("bump width {width} is not resolved by the grid")));
                }
                let spec = MollifierSpec::smooth(width);
                DensityField::from_fn(*grid, 0.0, |x| spec.profile(x))?
            }
            Self::DeltaBump => return Self::Bump { width: 4.0 * grid.spacing() }.build(grid),
            Self::Gaussian { variance } => {
                if !(variance > 0.0) {
                    return Err(Error::Config(format!("variance must be positive, got {variance}")));
                }
                DensityField::from_fn(*grid, 0.0, |x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    (-r2 / (2.0 * variance)).exp()
                })?
            }
            Self::Plateau { height, edge } => {
                if !(height > 0.0 && edge > 0.0) {
                    return Err(Error::Config("plateau height and edge must be positive".into()));
                }
                let a = 0.5 / height;
                let s = edge * std::f64::consts::SQRT_2;
                DensityField::from_fn(*grid, 0.0, |x| {
                    x.iter().map(|&v| 0.5 * (erf((v + a) / s) - erf((v - a) / s))).product()
                })?
            }
        };
        field.normalized()
    }

    /// Parses `bump:<width>`, `delta`, `gaussian:<variance>` or
    /// `plateau:<height>[:<edge>]`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default().trim();
        let num = |p: Option<&str>, what: &str| -> Result<f64> {
            p.ok_or_else(|| Error::Parse(format!("{kind} needs a {what}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad {what} in '{s}': {e}")))
        };
        match kind {
            "bump" => Ok(Self::Bump { width: num(parts.next(), "width")? }),
            "delta" => Ok(Self::DeltaBump),
            "gaussian" => Ok(Self::Gaussian { variance: num(parts.next(), "variance")? }),
            "plateau" => {
                let height = num(parts.next(), "height")?;
                let edge = match parts.next() {
                    Some(e) => num(Some(e), "edge")?,
                    None => 0.02 / height,
                };
                Ok(Self::Plateau { height, edge })
            }
            _ => Err(Error::Parse(format!("unknown initial data '{s}'"))),
        }
    }
}
