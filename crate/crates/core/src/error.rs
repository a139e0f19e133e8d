use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtfsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid frame parameters: {0}")]
    InvalidParams(String),

    #[error("cyclic prefix length {cp_len} out of range [0, {max}]")]
    CpOutOfRange { cp_len: usize, max: usize },

    #[error("waveform does not cover the required interval: {0}")]
    Coverage(String),

    #[error("waveform time origin is not aligned with the sampling lattice: {0}")]
    Alignment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, OtfsError>;
