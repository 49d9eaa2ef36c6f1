use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied inconsistent sizes, empty inputs, or out-of-range arguments.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input is outside the mathematical domain of the operation
    /// (non-SPD matrix, invalid correlation, singular factor, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Sparse Cholesky hit a non-positive pivot. `index` is in the
    /// original (unpermuted) ordering.
    #[error("matrix is not positive definite (pivot at row {index})")]
    NotPositiveDefinite { index: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error in {file}: {message}")]
    Parse { file: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Argument(_) | Error::Parse { .. } => 2,
            Error::Domain(_) | Error::NotPositiveDefinite { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}
