use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

/// Failures of a CLI invocation, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration or input file. Exit 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical routine rejected its input or failed. Exit 3.
    #[error("numerical failure during {stage}: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: userkit::Error,
    },
    /// Exit 1.
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn numerical(stage: &'static str) -> impl FnOnce(userkit::Error) -> CliError {
        move |source| CliError::Numerical { stage, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Machine-readable description for numerical failures.
    pub fn diagnostic_json(&self) -> String {
        let value = match self {
            CliError::Numerical { stage, source } => json!({
                "kind": "numerical",
                "stage": stage,
                "error": source.to_string(),
                "detail": format!("{source:?}"),
            }),
            CliError::Config(msg) => json!({ "kind": "config", "error": msg }),
            CliError::Io { path, source } => json!({
                "kind": "io",
                "path": path.display().to_string(),
                "error": source.to_string(),
            }),
        };
        serde_json::to_string_pretty(&value).expect("diagnostic serializes")
    }
}
