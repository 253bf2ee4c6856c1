use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("semigroup mismatch: {0}")]
    Mismatch(String),

    #[error("point {0} is outside the domain of the map")]
    OutsideDomain(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("random variable is not decomposable: {0}")]
    NonDecomposable(String),

    #[error("state space too large: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("degenerate functional: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
