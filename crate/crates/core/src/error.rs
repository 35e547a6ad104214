use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state {state} out of range for an arm with {n_states} states")]
    InvalidState { state: usize, n_states: usize },

    #[error("arm {arm} out of range for a world with {n_arms} arms")]
    InvalidArm { arm: usize, n_arms: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("range sampling failed after {retries} retries for {what}")]
    Sampling { what: String, retries: usize },

    #[error("linear program {0}")]
    Lp(#[from] crate::planner::LpError),

    #[error("preference value {0} outside the open unit interval")]
    PreferenceDomain(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
