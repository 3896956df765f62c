use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("boundary leakage {mass:.3e} exceeds the limit at t = {t}")]
    Leakage { t: f64, mass: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("realization discarded: {0}")]
    Discard(String),

    #[error("non-finite value in the multiplicative noise step at t = {t}")]
    Overflow { t: f64 },

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
