use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver stopped after {iterations} iterations without reaching tolerance (best value {best_value:e}, gap {gap:e})")]
    NotConverged {
        iterations: usize,
        best_value: f64,
        gap: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient accuracy: {0}")]
    Accuracy(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
