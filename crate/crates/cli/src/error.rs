use std::path::PathBuf;

use thiserror::Error;

/// Exit code for unreadable input, malformed files and invalid configuration.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for a metric precondition the inputs do not meet.
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{0}")]
    Config(String),
    #[error("{msg}")]
    Precondition { msg: String },
    #[error(transparent)]
    Core(#[from] pointsim::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition { .. } => EXIT_PRECONDITION,
            CliError::Core(e) if is_precondition(e) => EXIT_PRECONDITION,
            _ => EXIT_INPUT,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

fn is_precondition(e: &pointsim::Error) -> bool {
    use pointsim::Error::*;
    matches!(e, CardinalityMismatch { .. } | SizeLimitExceeded { .. } | InsufficientPoints { .. } | ShapeMismatch { .. })
}

pub type Result<T> = std::result::Result<T, CliError>;
