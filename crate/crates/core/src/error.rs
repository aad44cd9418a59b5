use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of the operation (negative rate, bad probability, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Palm distribution requested at an atom with zero intensity.
    #[error("Palm distribution undefined at atom {atom}: zero intensity")]
    PalmUndefined { atom: usize },

    /// The computation would exceed a configured size limit.
    #[error("resource limit: {0}")]
    Resource(String),

    /// The requested variant is not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Inputs are inconsistent with each other (mismatched carriers, missing coupling, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed serialized input.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterative solver did not terminate.
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
