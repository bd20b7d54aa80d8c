use std::path::PathBuf;

use serde_json::json;

/// Exit codes: 0 success, 1 I/O or data fault, 2 configuration error,
/// 3 nothing survived validation or export, 4 remote endpoint failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Data(_) => 1,
            CliError::Config(_) => 2,
            CliError::Empty(_) => 3,
            CliError::Remote(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Empty(_) => "empty",
            CliError::Remote(_) => "remote",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        json!({"error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}).to_string()
    }

    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> CliError {
        CliError::Io { path: path.into(), message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
