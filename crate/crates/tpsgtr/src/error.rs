use std::path::PathBuf;

use thiserror::Error;

/// Failures of the file formats and commands, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: corrupt file: {msg}", path.display())]
    Corrupt { path: PathBuf, msg: String },

    #[error("{}: checkpoint format version {found}, this build reads version {expected}", path.display())]
    Version { path: PathBuf, found: u64, expected: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },

    /// Gradient check ran but some group exceeded the tolerance.
    #[error("gradient check failed: worst relative error {worst:e}")]
    GradCheck { worst: f64 },

    #[error(transparent)]
    Core(tpsgtr_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::GradCheck { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Corrupt { .. } | CliError::Version { .. } => 3,
            CliError::Divergence { .. } => 4,
            CliError::Shape(_) => 5,
            CliError::Core(e) => match e {
                tpsgtr_core::Error::Divergence { .. } => 4,
                tpsgtr_core::Error::Dimension { .. } | tpsgtr_core::Error::Mismatch(_) => 5,
                _ => 2,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<tpsgtr_core::Error> for CliError {
    fn from(e: tpsgtr_core::Error) -> Self {
        match e {
            tpsgtr_core::Error::Divergence { epoch } => CliError::Divergence { epoch },
            tpsgtr_core::Error::Mismatch(msg) => CliError::Shape(msg),
            tpsgtr_core::Error::Dimension { .. } => CliError::Shape(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
