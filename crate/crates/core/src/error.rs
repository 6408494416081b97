//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor operations, estimators, and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A text input (tensor file, sample CSV, config) failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// An operation is only implemented up to a size cap.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// A computation encountered NaN or infinite input.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite(what.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedSize(msg.into())
    }
}
