//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input data or configuration (exit code 1 at the CLI).
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed file contents.
    #[error("parse error: {0}")]
    Parse(String),

    /// Array shape disagreement between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A model/pipeline contract was violated (wrong family for a wiring,
    /// grid-dependent plugin parameters, factor mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// CLI exit code: 1 for validation-class errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse(_) | Error::Shape(_) | Error::Contract(_) => 1,
            Error::Diverged(_) | Error::Io(_) | Error::Json(_) => 2,
        }
    }
}
