use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("missing result files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Missing(Vec<PathBuf>),
}

impl RunError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RunError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        RunError::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => EXIT_CONFIG,
            _ => EXIT_IO,
        }
    }
}

impl From<bearing_core::Error> for RunError {
    fn from(e: bearing_core::Error) -> Self {
        match e {
            bearing_core::Error::InvalidParameter { field, reason } => RunError::config(field, reason),
            bearing_core::Error::LengthMismatch { what, expected, actual } => {
                RunError::config(what, format!("expected length {expected}, got {actual}"))
            }
        }
    }
}
