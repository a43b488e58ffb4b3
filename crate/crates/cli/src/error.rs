use std::fmt;

use serde::Serialize;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    MissingPrerequisite,
    Data,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::MissingPrerequisite => 3,
            ErrorKind::Data => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::MissingPrerequisite,
            message: message.into(),
        }
    }

    pub fn data(message: impl fmt::Display) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.to_string(),
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "message": self.message,
            "exit_code": self.kind.exit_code(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

macro_rules! data_error_from {
    ($($ty:ty),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::data(e)
            }
        })*
    };
}

data_error_from!(
    signweave_core::lexicon::LexiconError,
    signweave_core::sentencegen::SentenceError,
    signweave_core::dataplan::PlanError,
    signweave_core::features::FeatureError,
    signweave_core::metrics::MetricError,
    signweave_core::jsonl::JsonlError,
    std::io::Error,
    serde_json::Error,
);

pub type Result<T> = std::result::Result<T, CliError>;
