use thiserror::Error;

/// Errors raised by the allocation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments that cannot be interpreted (bad index, mismatched shapes).
    #[error("usage error: {0}")]
    Usage(String),

    /// A numeric argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Configuration that cannot yield a meaningful problem instance.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative method stopped before meeting its tolerance.
    #[error("numerical error: {message} (last residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    /// A scenario or constraint file could not be decoded.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// Internal invariant broken; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
