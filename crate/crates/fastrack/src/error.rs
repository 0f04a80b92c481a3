use std::path::PathBuf;

use fastrack_core::Error as CoreError;

/// Process exit codes of the `fastrack` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const CONVERGENCE: i32 = 3;
    pub const PLANNER: i32 = 4;
    pub const SAFETY: i32 = 5;
    pub const VERIFY: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("planner failed: {0}")]
    Planner(String),
    #[error("safety postcondition violated: {0}")]
    Safety(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) => match e {
                CoreError::Unconverged(_) => exit::CONVERGENCE,
                CoreError::PlannerExhausted { .. } | CoreError::InvalidPath(_) => exit::PLANNER,
                CoreError::AttitudeGuard { .. } => exit::SAFETY,
                _ => exit::VALIDATION,
            },
            Error::Json { .. } | Error::Config(_) => exit::VALIDATION,
            Error::Convergence(_) => exit::CONVERGENCE,
            Error::Planner(_) => exit::PLANNER,
            Error::Safety(_) => exit::SAFETY,
            Error::Verify(_) => exit::VERIFY,
            Error::Io { .. } | Error::Csv(_) | Error::Format { .. } => exit::OTHER,
        }
    }
}
