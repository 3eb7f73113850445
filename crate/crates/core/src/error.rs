use thiserror::Error;

/// Errors raised by the tensor algebra, estimation and testing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("mode index {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid mode set: {0}")]
    InvalidModeSet(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("rank {rank} out of range (dimension {dim})")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("eigensolver failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("no divisor combination of {rank} fits dimensions {dims:?}")]
    NoDivisorCombination { rank: usize, dims: Vec<usize> },

    #[error("kronecker product of {0} entries exceeds the materialization cap")]
    KronTooLarge(usize),

    #[error("invalid level alpha={0}; must lie in (0, 1)")]
    InvalidAlpha(f64),

    #[error("non-stationary AR(2) coefficients ({0}, {1})")]
    NonStationary(f64, f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Parse(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
