//! Evaluation protocol: stratified sampling, blind pairing, rating
//! aggregation, and in-car subset selection over external datasets.

mod adapters;
mod aggregate;
mod filter;
mod pair;
mod sample;

pub use adapters::{read_kvret, read_schema_guided, service_domain, LabeledDialog};
pub use aggregate::{
    aggregate_likert, aggregate_pairwise, likert_stats, pairwise_majority, AggregationParams, Choice,
    LikertSummary, MajorityCounts, PairwiseCounts, RatingRecord, RatingValue,
};
pub use filter::{filter_incar_subset, normalize_service, split_fraction, FilterReport, ServiceRule, DEFAULT_WHITELIST};
pub use pair::{pair_for_comparison, BlindPair};
pub use sample::{
    sample_discodrive, sample_external, sample_splits, EXTERNAL_COUNTS, PER_DOMAIN_LENGTH,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("stratum ({domain}, {num_turns}) has {available} dialogs, {required} needed")]
    Understocked { domain: String, num_turns: usize, available: usize, required: usize },
    #[error("split `{split}` has {available} items, {required} needed")]
    ShortSplit { split: String, available: usize, required: usize },
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error("metric `{metric}` has {count} value(s); at least 2 are needed")]
    InsufficientData { metric: String, count: usize },
    #[error("{path}: {message}")]
    Adapter { path: String, message: String },
}
