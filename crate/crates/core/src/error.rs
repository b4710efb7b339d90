use thiserror::Error;

/// Errors raised by the modelling, assembly and certification layers.
#[derive(Debug, Error)]
pub enum LpvError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain mismatch: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LpvError>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(LpvError::Dimension(msg.into()))
}

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(LpvError::InvalidInput(msg.into()))
}
