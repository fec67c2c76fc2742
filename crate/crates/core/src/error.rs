use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter `{field}`: {message}")]
    Parameter { field: &'static str, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in `{term}`")]
    NonFinite { term: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn param(field: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Parameter { .. } | Error::Mismatch(_) => {
                ErrorCategory::Config
            }
            Error::NonFinite { .. } => ErrorCategory::Numeric,
            Error::Validation(_)
            | Error::Shape(_)
            | Error::Empty(_)
            | Error::Io { .. }
            | Error::Format { .. } => ErrorCategory::Data,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Shape(_) => "shape",
            Error::Parameter { .. } => "parameter",
            Error::Empty(_) => "empty",
            Error::NonFinite { .. } => "non_finite",
            Error::Config(_) => "config",
            Error::Mismatch(_) => "mismatch",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }
}
