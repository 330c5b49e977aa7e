use thiserror::Error;

/// Errors produced by state, channel and protocol operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("index {index} out of range for dimension {dim}")]
    InvalidIndex { index: usize, dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state has zero norm")]
    ZeroNormState,

    #[error("amplitudes are not normalized: sum of squares = {0}")]
    NotNormalized(f64),

    #[error("coefficient {value} at index {index} is negative")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("spectrum is linearly dependent: zero coefficients at indices {0:?}")]
    LinearlyDependent(Vec<usize>),

    #[error("feasibility oracle supports dimensions up to 4, got {0}")]
    OracleUnsupported(usize),

    #[error("only uniform priors are supported")]
    UnsupportedPriors,

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Signals an upstream bug rather than user error.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
