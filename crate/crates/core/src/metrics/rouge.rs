use super::MetricError;

/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) memory.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F-measure for one pair. Empty inputs score 0.
pub fn rouge_l(hyp: &[String], reference: &[String], beta: f64) -> f64 {
    let l = lcs_len(hyp, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / hyp.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean of per-pair ROUGE-L.
pub fn rouge_l_corpus(
    hyps: &[Vec<String>],
    refs: &[Vec<String>],
    beta: f64,
) -> Result<f64, MetricError> {
    if hyps.len() != refs.len() || hyps.is_empty() {
        return Err(MetricError::Argument(format!(
            "need equal, non-zero pair counts; got {} and {}",
            hyps.len(),
            refs.len()
        )));
    }
    let sum: f64 = hyps.iter().zip(refs).map(|(h, r)| rouge_l(h, r, beta)).sum();
    Ok(sum / hyps.len() as f64)
}
