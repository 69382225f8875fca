use std::path::Path;

use dialog_core::adapt::AdaptError;
use dialog_core::corpus::CorpusError;
use dialog_core::nlu::NluError;
use dialog_core::policy::PolicyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Input { path: String, msg: String },
    #[error("label inventory mismatch: {0}")]
    Validation(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            msg: msg.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for anything the caller can fix by changing arguments or input
    /// files, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } | CliError::Validation(_) => 2,
            CliError::Corpus(e) => match e {
                CorpusError::Generation(_) => 1,
                _ => 2,
            },
            CliError::Nlu(e) => match e {
                NluError::Config(_) | NluError::UnknownIntent(_) | NluError::Argument(_) | NluError::Format(_) => 2,
                NluError::Io { .. } | NluError::Feature(_) => 2,
                _ => 1,
            },
            CliError::Policy(e) => match e {
                PolicyError::Config(_) | PolicyError::Argument(_) | PolicyError::Format(_) | PolicyError::Io { .. } => 2,
                _ => 1,
            },
            CliError::Adapt(e) => match e {
                AdaptError::Labeling(_) | AdaptError::Argument(_) | AdaptError::Format(_) | AdaptError::Io { .. } => 2,
            },
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }
}
