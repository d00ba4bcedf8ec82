use thiserror::Error;

/// Errors raised by samplers, evaluators and studies.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or study parameter violates its invariant.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// An operation was called outside its mathematical domain (e.g. `i == j`).
    #[error("domain error: {0}")]
    Domain(String),
    /// A mark key that the model never uses.
    #[error("key error: {0}")]
    Key(String),
    /// The requested model combination has no closed form here.
    #[error("unsupported model: {0}")]
    Unsupported(String),
    /// The requested quantity diverges for the given parameters.
    #[error("divergent model: {0}")]
    Divergent(String),
    /// Numerical routine failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
