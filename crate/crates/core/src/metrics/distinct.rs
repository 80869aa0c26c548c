use std::collections::HashSet;

use super::MetricError;

/// Unique n-grams over total n-gram occurrences, pooled across utterances.
/// N-grams never span two utterances.
pub fn distinct_n<S: AsRef<str>>(utterances: &[Vec<S>], n: usize) -> Result<f64, MetricError> {
    if n == 0 {
        return Err(MetricError::Argument("n must be at least 1".into()));
    }
    let mut unique: HashSet<Vec<&str>> = HashSet::new();
    let mut total = 0usize;
    for utt in utterances {
        let toks: Vec<&str> = utt.iter().map(AsRef::as_ref).collect();
        for gram in toks.windows(n) {
            unique.insert(gram.to_vec());
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::Undefined(format!(
            "no utterance has {n} or more tokens"
        )));
    }
    Ok(unique.len() as f64 / total as f64)
}

/// Distinct-1..=max_n for one corpus.
pub fn distinct_table<S: AsRef<str>>(
    utterances: &[Vec<S>],
    max_n: usize,
) -> Result<Vec<f64>, MetricError> {
    (1..=max_n).map(|n| distinct_n(utterances, n)).collect()
}
