use thiserror::Error;

/// Errors raised while building or running a marketplace experiment.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs disagree on dimensions or the requested combination is not supported.
    #[error("configuration error: {0}")]
    Config(String),
    /// A value is outside its admissible domain (negative budget, bad rate, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// The estimator's contrast needs both arms but one is empty.
    #[error("undefined contrast: {0}")]
    UndefinedContrast(String),
    /// Exhaustive enumeration would exceed the size guard.
    #[error("enumeration of {size} assignments exceeds the guard of {limit}; {hint}")]
    EnumerationTooLarge { size: u128, limit: u128, hint: String },
    /// A simulated outcome broke `0 <= Y* <= Y` or the budget cap.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
