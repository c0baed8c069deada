use std::fmt::Display;
use std::path::{Path, PathBuf};

/// Errors of the file and command layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{source_name}, data row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },

    #[error(transparent)]
    Core(#[from] kfpca_core::Error),

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(source_name: &str, err: impl Display) -> Self {
        Error::Format {
            source_name: source_name.into(),
            message: err.to_string(),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(kfpca_core::Error::InvalidParameter(_)) => 1,
            Error::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "usage",
            3 => "numerical",
            _ => "data",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
