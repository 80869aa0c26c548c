use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BleuMode, MetricError, MetricParams, Smoothing};

/// Clipped n-gram matches for one order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramMatch {
    /// Hypothesis n-grams whose count was clipped by the reference.
    pub matched: u64,
    /// Hypothesis n-grams of this order.
    pub hyp_total: u64,
    /// Reference n-grams of this order.
    pub ref_total: u64,
}

impl NgramMatch {
    fn add(&mut self, other: NgramMatch) {
        self.matched += other.matched;
        self.hyp_total += other.hyp_total;
        self.ref_total += other.ref_total;
    }
}

fn counts(toks: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut m = HashMap::new();
    for g in toks.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

/// Clipped match counts of order `n` between one hypothesis and its reference.
pub fn ngram_match(hyp: &[String], reference: &[String], n: usize) -> NgramMatch {
    let h = counts(hyp, n);
    let r = counts(reference, n);
    let matched = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    NgramMatch {
        matched,
        hyp_total: hyp.len().saturating_sub(n - 1) as u64,
        ref_total: reference.len().saturating_sub(n - 1) as u64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScores {
    /// BLEU-1..=max_n, each in `[0, 1]`.
    pub scores: Vec<f64>,
    /// Pooled match counts per order (corpus mode) or summed over sentences.
    pub matches: Vec<NgramMatch>,
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn precision(m: &NgramMatch, order: usize, params: &MetricParams) -> f64 {
    if order >= 2 && params.bleu_smoothing == Smoothing::AddK {
        let k = params.smoothing_k;
        let denom = m.hyp_total as f64 + k;
        if denom == 0.0 {
            0.0
        } else {
            (m.matched as f64 + k) / denom
        }
    } else if m.hyp_total == 0 {
        0.0
    } else {
        m.matched as f64 / m.hyp_total as f64
    }
}

fn brevity(c: u64, r: u64) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

fn cumulative(matches: &[NgramMatch], bp: f64, params: &MetricParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(matches.len());
    let mut log_sum = 0.0;
    let mut zero = false;
    for (i, m) in matches.iter().enumerate() {
        let p = precision(m, i + 1, params);
        if p <= 0.0 {
            zero = true;
        } else {
            log_sum += p.ln();
        }
        let n = (i + 1) as f64;
        out.push(if zero { 0.0 } else { bp * (log_sum / n).exp() });
    }
    out
}

fn sentence_stats(hyp: &[String], reference: &[String], max_n: usize) -> Vec<NgramMatch> {
    (1..=max_n).map(|n| ngram_match(hyp, reference, n)).collect()
}

/// BLEU-1..=`params.max_n` with uniform weights over the orders.
pub fn bleu(
    hyps: &[Vec<String>],
    refs: &[Vec<String>],
    params: &MetricParams,
) -> Result<BleuScores, MetricError> {
    params.validate()?;
    if hyps.len() != refs.len() {
        return Err(MetricError::Argument(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(MetricError::Argument("no sentence pairs".into()));
    }
    let n = params.max_n;
    let per: Vec<Vec<NgramMatch>> = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| sentence_stats(h, r, n))
        .collect();
    let mut pooled = vec![NgramMatch::default(); n];
    for s in &per {
        for (acc, m) in pooled.iter_mut().zip(s) {
            acc.add(*m);
        }
    }
    let hyp_len: u64 = hyps.iter().map(|h| h.len() as u64).sum();
    let ref_len: u64 = refs.iter().map(|r| r.len() as u64).sum();
    let (scores, bp) = match params.bleu_mode {
        BleuMode::Corpus => {
            let bp = brevity(hyp_len, ref_len);
            (cumulative(&pooled, bp, params), bp)
        }
        BleuMode::SentenceAverage => {
            let mut sums = vec![0.0; n];
            let mut bp_sum = 0.0;
            for ((s, h), r) in per.iter().zip(hyps).zip(refs) {
                let bp = brevity(h.len() as u64, r.len() as u64);
                bp_sum += bp;
                for (acc, v) in sums.iter_mut().zip(cumulative(s, bp, params)) {
                    *acc += v;
                }
            }
            let k = per.len() as f64;
            (sums.into_iter().map(|v| v / k).collect(), bp_sum / k)
        }
    };
    Ok(BleuScores {
        scores,
        matches: pooled,
        brevity_penalty: bp,
        hyp_len,
        ref_len,
    })
}
