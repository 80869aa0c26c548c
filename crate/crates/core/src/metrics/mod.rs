//! Lexical diversity (distinct-n) and overlap metrics (BLEU-1..4, ROUGE-L,
//! METEOR).
//!
//! Kernels work on token lists and return fractions in `[0, 1]`. The
//! corpus report scales everything to percentages, which is how results
//! tables are usually printed.

mod bleu;
mod distinct;
mod meteor;
mod report;
mod rouge;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, ngram_match, BleuScores, NgramMatch};
pub use distinct::{distinct_n, distinct_table};
pub use meteor::{align, meteor, meteor_corpus, Alignment, MatchStage, MeteorDetail};
pub use report::{corpus_report, parse_generations, GenerationRecord, MetricReport};
pub use rouge::{lcs_len, rouge_l, rouge_l_corpus};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// Adds `smoothing_k` to numerator and denominator of orders >= 2.
    #[default]
    AddK,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuMode {
    /// Counts pooled over the corpus, one brevity penalty.
    #[default]
    Corpus,
    /// Sentence-level BLEU averaged over pairs.
    SentenceAverage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub max_n: usize,
    pub bleu_smoothing: Smoothing,
    pub smoothing_k: f64,
    pub bleu_mode: BleuMode,
    pub rouge_beta: f64,
    pub meteor_alpha: f64,
    pub meteor_beta: f64,
    pub meteor_gamma: f64,
    pub lowercase: bool,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            max_n: 4,
            bleu_smoothing: Smoothing::AddK,
            smoothing_k: 1.0,
            bleu_mode: BleuMode::Corpus,
            rouge_beta: 1.0,
            meteor_alpha: 0.9,
            meteor_beta: 3.0,
            meteor_gamma: 0.5,
            lowercase: true,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.max_n == 0 {
            return Err(MetricError::InvalidParams("max_n must be at least 1".into()));
        }
        let reals = [
            ("smoothing_k", self.smoothing_k),
            ("rouge_beta", self.rouge_beta),
            ("meteor_alpha", self.meteor_alpha),
            ("meteor_beta", self.meteor_beta),
            ("meteor_gamma", self.meteor_gamma),
        ];
        for (name, v) in reals {
            if !v.is_finite() || v < 0.0 {
                return Err(MetricError::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.meteor_alpha > 1.0 {
            return Err(MetricError::InvalidParams("meteor_alpha must be <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error("invalid metric parameters: {0}")]
    InvalidParams(String),
    #[error("record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
