use thiserror::Error;

/// Errors raised by the sampling engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("log acceptance ratio is NaN")]
    NanLogRatio,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("all particle weights are zero; filter collapsed")]
    FilterCollapsed,

    #[error("trajectory diverged at time index {0}")]
    Diverged(usize),

    #[error("kernel matrix is not positive definite even after jitter {0:e}")]
    NotPositiveDefinite(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("initial log-likelihood is -inf; choose a different starting point")]
    BadStartingPoint,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
