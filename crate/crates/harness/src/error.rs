use std::path::PathBuf;

use qlmf_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} failed: {source}")]
    Solver {
        stage: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("training aborted in {stage}: {source}")]
    Training {
        stage: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn solver(stage: &'static str) -> impl FnOnce(CoreError) -> Self {
        move |source| match source {
            CoreError::Unstable { .. } | CoreError::Invalid(_) | CoreError::Dimension { .. } => {
                HarnessError::Config(format!("{stage}: {source}"))
            }
            source => HarnessError::Solver { stage, source },
        }
    }

    pub fn training(stage: &'static str) -> impl FnOnce(CoreError) -> Self {
        move |source| HarnessError::Training { stage, source }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Solver { .. } => 3,
            HarnessError::Training { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
