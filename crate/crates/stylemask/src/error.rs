use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: truncated payload, expected {expected} bytes after the header, found {found}")]
    Truncated { path: PathBuf, expected: u64, found: u64 },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] stylemask_core::Error),
    #[error("{0}")]
    Violation(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        AppError::Format { path: path.to_path_buf(), message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        AppError::Validation(message.into())
    }

    /// 1 for I/O, 2 for bad input or flags, 3 for a violated property.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Io { .. } => 1,
            AppError::Format { .. } | AppError::Truncated { .. } | AppError::Validation(_) | AppError::Core(_) => 2,
            AppError::Violation(_) => 3,
        }
    }

    /// Attach a file path to a core validation error.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            AppError::Core(e) => AppError::Validation(format!("{}: {e}", path.display())),
            other => other,
        }
    }
}
