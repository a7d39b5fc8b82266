use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    ParseConfig { path: PathBuf, source: serde_json::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::ReadConfig { .. } | CliError::ParseConfig { .. } => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NOT_CONVERGED,
            CliError::Write { .. } | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Result of a completed run; failures found by the run itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    InvariantViolated,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => EXIT_OK,
            Status::NotConverged => EXIT_NOT_CONVERGED,
            Status::InvariantViolated => EXIT_INVARIANT,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NotConverged => "not_converged",
            Status::InvariantViolated => "invariant_violated",
        }
    }
}
