use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ambient dimension must be at least 1")]
    EmptyDimension,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("sublattice is not primitive")]
    NotPrimitive,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("time bound {given} is too small; at least {needed} is required")]
    InsufficientTimeBound { needed: i64, given: i64 },
    #[error("field is not purely spatial (found temporal frequency {0})")]
    NotSpatial(i64),
    #[error("grid of shape {shape:?} does not resolve the field")]
    Unresolved { shape: Vec<usize> },
    #[error("fixed-point map is not contracting (factor {factor:.3e} at tau {tau:.3e})")]
    NonContracting { factor: f64, tau: f64 },
    #[error("iteration did not reach tolerance {tol:.1e} after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NonHermitian(f64),
    #[error("multiplier takes negative values (minimum {0:.3e})")]
    NegativeMultiplier(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn checked<T>(value: Option<T>, what: &'static str) -> Result<T> {
    value.ok_or(Error::Overflow(what))
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
