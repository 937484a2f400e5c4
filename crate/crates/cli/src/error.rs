use std::path::Path;

use thiserror::Error;

/// CLI failures, split by exit code: usage and configuration problems exit
/// with 2, simulation and property failures with 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        CliError::Failure(msg.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Failure(format!("{}: {err}", path.display()))
    }
}

impl From<rdsim::ConfigError> for CliError {
    fn from(e: rdsim::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<rdsim::SimError> for CliError {
    fn from(e: rdsim::SimError) -> Self {
        match e {
            rdsim::SimError::Config(c) => c.into(),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<rdsim::WorkloadError> for CliError {
    fn from(e: rdsim::WorkloadError) -> Self {
        match e {
            rdsim::WorkloadError::Sim(s) => s.into(),
            rdsim::WorkloadError::Metrics(m) => CliError::Failure(m.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<rdsim::MetricsError> for CliError {
    fn from(e: rdsim::MetricsError) -> Self {
        CliError::Failure(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
