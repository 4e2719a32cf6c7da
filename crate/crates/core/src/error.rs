use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum LswError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear-algebra step failed its accuracy check.
    #[error("numerical error: {message} (condition number {condition_number:.3e})")]
    Numerical {
        message: String,
        condition_number: f64,
    },

    /// A dense allocation would exceed the configured memory bound.
    #[error("resource error: {0}")]
    Resource(String),

    /// A spectrum file could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A data file is missing, unreadable or malformed.
    #[error("input error: {0}")]
    Input(String),

    /// The adaptive procedure was configured so that it cannot run.
    #[error("configuration error: {0}")]
    Config(String),

    /// An invariant that should hold by construction was violated.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, LswError>;

pub(crate) fn domain(msg: impl Into<String>) -> LswError {
    LswError::Domain(msg.into())
}
