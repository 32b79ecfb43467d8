use std::ops::Range;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("`{name}` at byte {offset} expects {expected} argument(s), found {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("variable `{name}` at byte {offset} is out of range for dimension {dim}")]
    IndexOutOfRange {
        name: String,
        offset: usize,
        dim: usize,
    },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain error in `{expr}` (bytes {}..{}): {message}", span.start, span.end)]
    Domain {
        expr: String,
        span: Range<usize>,
        message: String,
    },

    #[error("integration produced a non-finite state; last valid time {last_valid_time}")]
    NonFinite { last_valid_time: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("identity `{name}` violated: residual {residual:e} exceeds {tolerance:e}")]
    Identity {
        name: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("singular linear system: {0}")]
    Singular(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
