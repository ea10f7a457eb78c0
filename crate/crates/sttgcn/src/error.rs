//! Error type shared by the whole crate.

use std::io;
use thiserror::Error;

/// Errors raised by library operations and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// API misuse: invalid mode, rank out of range, shape mismatch.
    #[error("usage: {0}")]
    Usage(String),

    /// Malformed input data. `line` is 1-based; 0 means the location is not
    /// line-oriented (binary files report an element offset in `msg`).
    #[error("format: {source_name}:{line}: {msg}")]
    Format {
        source_name: String,
        line: usize,
        msg: String,
    },

    /// Numerical failure, e.g. an SVD sweep that did not converge.
    #[error("numerical: {0}")]
    Numerical(String),

    /// A metric that is undefined for the given inputs (MAPE with all-zero
    /// targets).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn format(source_name: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
