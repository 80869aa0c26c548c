use std::process::ExitCode;

use disco_core::annotation::AnnotationError;
use disco_core::backend::BackendError;
use disco_core::config::ConfigError;
use disco_core::corpus::CorpusError;
use disco_core::disfluency::{InjectCorpusError, LexiconError};
use disco_core::eval::EvalError;
use disco_core::metrics::MetricError;
use disco_core::scenario::ScenarioError;
use disco_core::sim::SimError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Backend(_) => "backend",
        }
    }

    pub fn report(&self, json_errors: bool) -> ExitCode {
        if json_errors {
            let env = json!({"error": {"kind": self.kind(), "code": self.code(), "message": self.to_string()}});
            eprintln!("{env}");
        } else {
            eprintln!("error: {self}");
        }
        ExitCode::from(self.code())
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } | ConfigError::MissingPath(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Backend(b) => b.into(),
            ScenarioError::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => CliError::Usage(e.to_string()),
            SimError::Aborted { .. } => CliError::Backend(e.to_string()),
        }
    }
}

impl From<InjectCorpusError> for CliError {
    fn from(e: InjectCorpusError) -> Self {
        match e {
            InjectCorpusError::NoOps | InjectCorpusError::Rate(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Argument(_) | MetricError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AnnotationError> for CliError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
