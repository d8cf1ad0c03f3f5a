use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e}, last iterate {last_iterate:?})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: [f64; 2],
    },

    #[error("theorem violation: {what}")]
    TheoremViolation {
        what: String,
        witness: serde_json::Value,
    },

    #[error("transport solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
