use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not positive definite: factorization broke down at pivot {pivot} (value {value:e})")]
    Indefinite { pivot: usize, value: f64 },

    #[error("operator is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("{what} overflowed to a non-finite value")]
    Overflow { what: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge for Gram entry ({row}, {col}); worst error estimate {estimate:e}")]
    QuadratureFailure { row: usize, col: usize, estimate: f64 },

    #[error(
        "truncation sensitivity: doubling N from {n_trunc} changed the SPC at n = {n:e} by {relative_change:.3e} (limit {tolerance:.1e}); raise N"
    )]
    TruncationSensitivity {
        n_trunc: usize,
        n: f64,
        relative_change: f64,
        tolerance: f64,
    },

    #[error("posterior covariances differ by relative {relative:e}, exceeding {tolerance:e}")]
    CovarianceMismatch { relative: f64, tolerance: f64 },

    #[error("dual-formula cross-check failed: {what} differ by relative {relative:e}")]
    CrossCheck { what: &'static str, relative: f64 },

    #[error("not enough points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("operation requires a {expected} operator")]
    WrongKind { expected: &'static str },
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
