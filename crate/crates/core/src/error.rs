use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a structural invariant (shape, normalization, ordering).
    #[error("validation error: {0}")]
    Validation(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Problem too large for an exhaustive oracle.
    #[error("size error: {what} has {got} elements, cap is {cap}")]
    Size {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    /// Non-finite loss, gradient or parameter during training.
    #[error("training error: {0}")]
    Training(String),

    /// Environment produced or received an invalid state.
    #[error("environment fault: {0}")]
    Environment(String),

    /// Bad configuration file or flag.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
