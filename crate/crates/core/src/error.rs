use thiserror::Error;

/// Errors raised by optimizers, objectives, the tuner, the harness and the toy trainer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0} (must be at least 1)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite gradient at coordinate {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("invalid {name}: {value} ({reason})")]
    InvalidRate {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("optimizer diverged at iteration {iteration}")]
    Divergence { iteration: u64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid finite-difference step: {0}")]
    InvalidStep(f64),

    #[error("stale cache: {0}")]
    StaleCache(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
