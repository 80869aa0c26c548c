//! Human-evaluation sessions: manifests, per-evaluator item order, an
//! append-only rating log, and summaries.

mod forms;
mod store;

use serde::{Deserialize, Serialize};

pub use forms::{form_spec, metric_names, FormSpec, MetricKind, MetricSpec};
pub use store::{
    AnnotationStore, DialogView, ItemPayload, NextItem, PairView, PairwiseSummary, Session, SessionItem,
    SessionSpec, SessionState, SessionSummary, SourceCounts, TurnView, read_rating_log, RATINGS_FILE, SESSIONS_DIR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Intrinsic,
    Pairwise,
    DisfluencyIntegration,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Intrinsic => "intrinsic",
            EvalMode::Pairwise => "pairwise",
            EvalMode::DisfluencyIntegration => "disfluency_integration",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [EvalMode::Intrinsic, EvalMode::Pairwise, EvalMode::DisfluencyIntegration]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown evaluation mode `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("invalid request: {0}")]
    Argument(String),
    #[error("rating rejected: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
