//! Numerics for a nonlocal reaction–diffusion equation, the stochastic heat
//! equation with multiplicative noise, and the moment hierarchy linking them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closure;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod heat;
pub mod hierarchy;
pub mod init;
pub mod kernel;
pub mod mc;
pub mod rd;
pub mod rng;
pub mod she;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
pub use field::DensityField;
pub use grid::Grid;
pub use heat::{heat_kernel, heat_propagate, HeatPropagator};
pub use init::InitialData;
pub use kernel::{make_kernel, BumpFamily, CovarianceKernel, MollifierSpec};
pub use mc::McEstimate;
pub use rng::RngPlan;
pub use spectral::HeatSymbol;
