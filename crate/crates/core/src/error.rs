use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("action {action} out of range at step {step} in state {state} (num_actions = {num_actions})")]
    InvalidAction {
        step: usize,
        state: usize,
        action: usize,
        num_actions: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("environment generation failed: {0}")]
    Generation(String),

    #[error(
        "meta-episode {meta_index} used its {cap} episodes without collecting H optimistic steps; \
         target state {target} was missed in {misses} of them, so the MDP is likely not ergodic \
         under the baseline policy"
    )]
    MetaEpisodeCap {
        meta_index: usize,
        target: usize,
        misses: usize,
        cap: usize,
    },

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::Dimension(_) => "dimension_mismatch",
            Error::InvalidAction { .. } => "invalid_action",
            Error::Config(_) => "config",
            Error::Generation(_) => "generation",
            Error::MetaEpisodeCap { .. } => "meta_episode_cap",
            Error::Assumption(_) => "assumption",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            kind: self.kind().to_string(),
            message: self.to_string(),
        }
    }
}

/// Serializable form of an [`Error`].
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}
