use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    /// Required artifacts are missing or unreadable.
    #[error("{0}")]
    Input(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{failed} of {total} sweep runs failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 0 ok, 1 config or input error, 2 backend or I/O error, 3 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input(_) => 1,
            Self::Backend(_) | Self::Io { .. } => 2,
            Self::PartialSweep { .. } => 3,
        }
    }
}
