use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Help(String),

    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("repetition {repetition} (seed {seed}) failed: {source}")]
    Repetition {
        repetition: usize,
        seed: u64,
        #[source]
        source: stabcp::Error,
    },

    #[error(transparent)]
    Core(#[from] stabcp::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        let core = match self {
            CliError::Help(_) => return 0,
            CliError::Usage(_) | CliError::ConfigFile { .. } => return 1,
            CliError::Io(_) | CliError::Csv(_) => return 2,
            CliError::Repetition { source, .. } => source,
            CliError::Core(e) => e,
        };
        if core.is_numeric() {
            3
        } else if core.is_data() {
            2
        } else {
            1
        }
    }
}
