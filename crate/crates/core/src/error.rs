use thiserror::Error;

/// Errors raised by the coding, shaping and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// The lower-level bit pattern has zero probability under the pmf.
    #[error("degenerate conditioning at level {level}: lower bits {pattern:#b} carry no mass")]
    DegenerateConditioning { level: usize, pattern: usize },

    #[error("info-density grid overflow: {bins} bins needed, limit is {limit}")]
    GridOverflow { bins: usize, limit: usize },

    #[error("construction does not match config: {0}")]
    ConstructionMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
