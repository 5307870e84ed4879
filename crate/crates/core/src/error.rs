use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hand model: {0}")]
    InvalidModel(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("camera id `{0}` is not part of the rig")]
    UnknownCamera(String),

    /// Fewer confident, in-front joints than the solver needs.
    #[error("unsolvable frame: {active} active joints (need at least {required})")]
    Unsolvable { active: usize, required: usize },

    #[error("non-finite cost at the initial pose")]
    NonFiniteCost,

    #[error("missing handedness tag for hand `{0}`")]
    MissingHandedness(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
