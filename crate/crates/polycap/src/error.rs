use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input vectors or matrices have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A size guard was exceeded (expansion, enumeration or pivoting budget).
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Input data failed validation (inhomogeneous polynomial, negative
    /// coefficient, non-PSD matrix, malformed file).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A numeric procedure produced an unreliable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The capacity infimum is not attained (boundary case), so the requested
    /// operation (e.g. scaling to doubly-stochastic form) is undefined.
    #[error("minimum not attained: {0}")]
    NotAttained(String),

    /// The capacity solver exhausted its iteration cap. Carries the last
    /// iterate for diagnosis.
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e}, value {value:.6e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        value: f64,
        point: Vec<f64>,
    },

    /// Malformed textual input (CSV / JSON).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
