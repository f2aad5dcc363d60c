use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] grapheneqg_core::Error),
    #[error("{failed} of {total} checks failed")]
    CheckFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use grapheneqg_core::Error as E;
        match self {
            CliError::Io { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Engine(
                E::Domain(_)
                | E::InvalidPotential(_)
                | E::UnsupportedLayers(_)
                | E::InvalidStack(_)
                | E::Shape(_),
            ) => 3,
            CliError::Engine(_) | CliError::CheckFailed { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
