use std::path::Path;

use thiserror::Error;

/// Process exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_FLAGGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown run id `{0}`")]
    UnknownRun(String),

    #[error("stored run `{run}` is unreadable: {reason}")]
    Corrupt { run: String, reason: String },

    #[error(transparent)]
    Core(#[from] fracdn::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(fracdn::Error::NonConvergence { .. }) => EXIT_NON_CONVERGENCE,
            CliError::Core(fracdn::Error::NonFinite(_)) => EXIT_FLAGGED,
            _ => EXIT_CONFIG,
        }
    }
}
