use std::process::ExitCode;

use ted_core::analytics::AnalyticsError;
use ted_core::ingestion::IngestError;
use ted_core::interpret::InterpretError;
use ted_core::model::{ConfigError, ModelError};
use thiserror::Error;

/// Failure categories; each maps to a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or configuration (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// Unreadable or malformed input (exit 3).
    #[error("input error: {0}")]
    Parse(String),
    /// Scoring or analysis failure (exit 4).
    #[error("computation error: {0}")]
    Compute(String),
    /// Results could not be written (exit 1).
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Output(_) => 1,
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Compute(_) => 4,
        })
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Config(c) => c.into(),
            AnalyticsError::MissingPspi { .. } | AnalyticsError::MissingLabel { .. } | AnalyticsError::Misaligned { .. } => {
                CliError::Parse(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl From<InterpretError> for CliError {
    fn from(e: InterpretError) -> Self {
        match e {
            InterpretError::Params(_) => CliError::Config(e.to_string()),
            InterpretError::MissingPspi { .. }
            | InterpretError::MissingFeature { .. }
            | InterpretError::AtFrame { .. }
            | InterpretError::Model(_)
            | InterpretError::MissingLabel { .. }
            | InterpretError::MissingScore { .. }
            | InterpretError::PredictionsFile { .. }
            | InterpretError::Shape(_) => CliError::Parse(e.to_string()),
            InterpretError::DegenerateLabels | InterpretError::TooFewSubjects { .. } => {
                CliError::Compute(e.to_string())
            }
        }
    }
}
