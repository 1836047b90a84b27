use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Input/output failure while reading or writing files.
pub const EXIT_RUNTIME: i32 = 1;
/// Bad flags, unreadable config or a numerical precondition failure.
pub const EXIT_CONFIG: i32 = 2;
/// A verification property was violated.
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] psd_extract::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{failed} verification properties failed")]
    PropertyFailure { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::PropertyFailure { .. } => EXIT_PROPERTY,
            CliError::Config(_) | CliError::Core(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => EXIT_RUNTIME,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
