use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a command, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: snapid_core::Error,
    },

    #[error(transparent)]
    Core(#[from] snapid_core::Error),
}

impl CliError {
    /// 2 for bad flags or input, 3 for I/O, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Input { source, .. } | CliError::Core(source) => {
                if source.is_io() {
                    3
                } else if source.is_numeric() {
                    4
                } else {
                    2
                }
            }
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(path: &Path, source: snapid_core::Error) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
