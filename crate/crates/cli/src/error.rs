use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] psi_hilfer::Error),
    #[error("{field}: {reason}")]
    Config { field: String, reason: String },
    #[error("invalid JSON in {path} at line {line}, column {column}: {message}")]
    ConfigSyntax { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{field}: {source}")]
    Expression { field: String, source: psi_hilfer::expr::ParseError },
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot encode JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config { .. } => "config",
            CliError::ConfigSyntax { .. } => "config_syntax",
            CliError::Expression { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Csv(_) | CliError::Json(_) => "output",
        }
    }

    /// Machine-readable record printed on failure.
    pub fn record(&self) -> ErrorRecord {
        let (field, offset) = match self {
            CliError::Config { field, .. } => (Some(field.clone()), None),
            CliError::Expression { field, source } => (Some(field.clone()), Some(source.offset)),
            _ => (None, None),
        };
        let (line, column) = match self {
            CliError::ConfigSyntax { line, column, .. } => (Some(*line), Some(*column)),
            _ => (None, None),
        };
        ErrorRecord { error: ErrorBody { kind: self.kind(), message: self.to_string(), field, offset, line, column } }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}
