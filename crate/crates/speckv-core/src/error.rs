//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus generation, model training, policy evaluation,
/// and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("incomplete profile, missing cells: {}", missing.join(", "))]
    IncompleteProfile { missing: Vec<String> },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    CsvRow {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    MalformedFile { path: String, message: String },

    #[error("{path}: unsupported format version `{found}` (expected `{expected}`)")]
    FormatVersion {
        path: String,
        found: String,
        expected: String,
    },

    #[error("{path}: content hash mismatch; file is corrupt or was modified")]
    HashMismatch { path: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
