use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatingValue {
    Likert(u8),
    Choice(Choice),
}

/// One judgment. For pairwise items `choice` refers to the displayed side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub evaluator_id: String,
    pub item_id: String,
    pub metric: String,
    pub value: RatingValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    /// Position in the rating log, assigned on acceptance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    pub ci_z: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        AggregationParams { ci_z: 1.96 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikertSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub half_width: f64,
}

impl fmt::Display for LikertSummary {
    /// `3.8 (±0.18)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1} (±{:.2})", self.mean, self.half_width)
    }
}

/// Mean and normal-approximation half-width `z * sd / sqrt(n)`.
pub fn likert_stats(values: &[f64], params: &AggregationParams) -> Result<LikertSummary, EvalError> {
    if !(params.ci_z.is_finite() && params.ci_z > 0.0) {
        return Err(EvalError::Argument("ci_z must be positive".into()));
    }
    let n = values.len();
    if n < 2 {
        return Err(EvalError::InsufficientData { metric: String::new(), count: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok(LikertSummary { n, mean, sd, half_width: params.ci_z * sd / (n as f64).sqrt() })
}

/// Per-metric summary over every Likert value, pooled across evaluators.
pub fn aggregate_likert(
    records: &[RatingRecord],
    params: &AggregationParams,
) -> Result<BTreeMap<String, LikertSummary>, EvalError> {
    let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let RatingValue::Likert(v) = r.value {
            by_metric.entry(&r.metric).or_default().push(f64::from(v));
        }
    }
    by_metric
        .into_iter()
        .map(|(m, vals)| {
            likert_stats(&vals, params)
                .map(|s| (m.to_string(), s))
                .map_err(|e| match e {
                    EvalError::InsufficientData { count, .. } => EvalError::InsufficientData { metric: m.into(), count },
                    e => e,
                })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseCounts {
    pub a: usize,
    pub b: usize,
}

/// Raw per-evaluator counts of each side, per metric.
pub fn aggregate_pairwise(records: &[RatingRecord]) -> BTreeMap<String, PairwiseCounts> {
    let mut out: BTreeMap<String, PairwiseCounts> = BTreeMap::new();
    for r in records {
        if let RatingValue::Choice(c) = r.value {
            let e = out.entry(r.metric.clone()).or_default();
            match c {
                Choice::A => e.a += 1,
                Choice::B => e.b += 1,
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityCounts {
    pub a: usize,
    pub b: usize,
    pub ties: usize,
}

/// One vote per item: the side most evaluators chose, or a tie.
pub fn pairwise_majority(records: &[RatingRecord]) -> BTreeMap<String, MajorityCounts> {
    let mut votes: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
    for r in records {
        if let RatingValue::Choice(c) = r.value {
            let e = votes.entry((&r.metric, &r.item_id)).or_default();
            match c {
                Choice::A => e.0 += 1,
                Choice::B => e.1 += 1,
            }
        }
    }
    let mut out: BTreeMap<String, MajorityCounts> = BTreeMap::new();
    for ((metric, _), (a, b)) in votes {
        let e = out.entry(metric.to_string()).or_default();
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => e.a += 1,
            std::cmp::Ordering::Less => e.b += 1,
            std::cmp::Ordering::Equal => e.ties += 1,
        }
    }
    out
}
