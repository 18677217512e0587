use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e}, tolerance {tol:.1e})")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("eigensolver failed to converge")]
    EigenNoConvergence,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator side d^(n+1) for d={d}, n={n} exceeds the size cap {cap}")]
    SizeCapExceeded { d: usize, n: usize, cap: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("numerical breakdown at iteration {iteration}: {reason}")]
    NumericalBreakdown { iteration: usize, reason: String },

    #[error("computed cost {value} lies outside the bounds [{lower}, {upper}]")]
    BoundViolation { value: f64, lower: f64, upper: f64 },

    #[error("solver did not reach optimality (status {status}, relative gap {gap:.3e})")]
    NotConverged { status: String, gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
