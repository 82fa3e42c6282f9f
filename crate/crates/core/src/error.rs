//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Nonsingular skew-symmetric matrices have even dimension, so odd sizes
    /// are rejected up front.
    #[error("dimension {0} is odd; a nonsingular skew-symmetric matrix has even dimension")]
    OddDimension(usize),

    #[error("matrix is singular or numerically singular (condition estimate {cond_est:.3e})")]
    SingularMatrix { cond_est: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} is too small; need n >= 2")]
    DimensionTooSmall(usize),

    #[error("matrix or vector entry is not finite")]
    NonfiniteEntry,

    #[error("matrix tagged skew violates A^t = -A at entry ({i}, {j})")]
    NotSkew { i: usize, j: usize },

    #[error("seed vector for a Krylov basis has zero norm")]
    ZeroSeed,

    #[error("requested subspace dimension {requested} exceeds the Krylov grade {grade}")]
    BasisTruncated { requested: usize, grade: usize },

    #[error("vector is not in the Krylov subspace (projection residual {residual:.3e})")]
    StaleBasis { residual: f64 },

    #[error("nonfinite {what} at iteration {iteration}; the solve diverged")]
    Divergence {
        what: &'static str,
        iteration: usize,
    },

    #[error("could not generate a nonsingular instance after {retries} attempts")]
    InstanceGeneration { retries: usize },

    #[error("diagonal preconditioner has a zero entry at index {0}")]
    ZeroDiagonal(usize),

    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
