use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: out-of-range indices, empty sets, invalid parameters.
    #[error("usage error: {0}")]
    Usage(String),
    /// An input distance table is not a metric.
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A hard step or epoch cap was hit.
    #[error("cap exceeded: {0}")]
    Cap(String),
    /// A randomized subroutine ran out of attempts or an internal check failed.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
