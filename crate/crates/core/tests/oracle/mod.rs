//! Brute-force reference implementations. Deliberately naive: enumeration
//! over subsets and alignments, linear scans instead of hash maps.

#![allow(dead_code)]

use rust_stemmers::{Algorithm, Stemmer};

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn grams(toks: &[String], n: usize) -> Vec<Vec<String>> {
    if toks.len() < n {
        return Vec::new();
    }
    (0..=toks.len() - n)
        .map(|i| toks[i..i + n].to_vec())
        .collect()
}

/// Distinct-n by sorting every n-gram occurrence and dropping repeats.
/// `None` when no utterance is long enough.
pub fn distinct(utts: &[Vec<String>], n: usize) -> Option<f64> {
    let mut all: Vec<Vec<String>> = utts.iter().flat_map(|u| grams(u, n)).collect();
    let total = all.len();
    if total == 0 {
        return None;
    }
    all.sort();
    all.dedup();
    Some(all.len() as f64 / total as f64)
}

fn occurrences(hay: &[Vec<String>], g: &[String]) -> usize {
    hay.iter().filter(|x| x.as_slice() == g).count()
}

/// Clipped matches and hypothesis n-gram total for one pair.
fn clipped(h: &[String], r: &[String], n: usize) -> (usize, usize) {
    let hg = grams(h, n);
    let rg = grams(r, n);
    let mut seen: Vec<&Vec<String>> = Vec::new();
    let mut matched = 0;
    for g in &hg {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        matched += occurrences(&hg, g).min(occurrences(&rg, g));
    }
    (matched, hg.len())
}

fn bp(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

fn bleu_from(counts: &[(usize, usize)], c: usize, r: usize, smooth: bool) -> Vec<f64> {
    let b = bp(c, r);
    let mut out = Vec::new();
    for upto in 1..=counts.len() {
        let mut logs = Vec::new();
        let mut dead = false;
        for (i, &(m, t)) in counts[..upto].iter().enumerate() {
            let p = if smooth && i >= 1 {
                (m as f64 + 1.0) / (t as f64 + 1.0)
            } else if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            };
            if p == 0.0 {
                dead = true;
            } else {
                logs.push(p.ln());
            }
        }
        out.push(if dead {
            0.0
        } else {
            b * (logs.iter().sum::<f64>() / upto as f64).exp()
        });
    }
    out
}

/// Corpus BLEU-1..=max_n: counts pooled over pairs, one brevity penalty.
pub fn bleu_corpus(
    hyps: &[Vec<String>],
    refs: &[Vec<String>],
    max_n: usize,
    smooth: bool,
) -> Vec<f64> {
    let counts: Vec<(usize, usize)> = (1..=max_n)
        .map(|n| {
            hyps.iter()
                .zip(refs)
                .map(|(h, r)| clipped(h, r, n))
                .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
        })
        .collect();
    let c = hyps.iter().map(Vec::len).sum();
    let r = refs.iter().map(Vec::len).sum();
    bleu_from(&counts, c, r, smooth)
}

/// Mean of single-pair corpus BLEU.
pub fn bleu_sentence_avg(
    hyps: &[Vec<String>],
    refs: &[Vec<String>],
    max_n: usize,
    smooth: bool,
) -> Vec<f64> {
    let mut sum = vec![0.0; max_n];
    for (h, r) in hyps.iter().zip(refs) {
        for (a, v) in sum
            .iter_mut()
            .zip(bleu_corpus(std::slice::from_ref(h), std::slice::from_ref(r), max_n, smooth))
        {
            *a += v;
        }
    }
    sum.into_iter().map(|v| v / hyps.len() as f64).collect()
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|x| it.any(|y| y == *x))
}

/// LCS by trying every subset of the hypothesis.
pub fn lcs(h: &[String], r: &[String]) -> usize {
    assert!(h.len() <= 20, "oracle is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << h.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&String> = (0..h.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &h[i])
            .collect();
        if is_subsequence(&sub, r) {
            best = k;
        }
    }
    best
}

pub fn rouge_l(h: &[String], r: &[String], beta: f64) -> f64 {
    let l = lcs(h, r);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / h.len() as f64;
    let rc = l as f64 / r.len() as f64;
    (1.0 + beta * beta) * p * rc / (rc + beta * beta * p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeteorParts {
    pub matches: usize,
    pub exact: usize,
    pub chunks: usize,
}

fn chunks_of(pairs: &[(usize, usize)]) -> usize {
    let mut c = 0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if k == 0 || pairs[k - 1] != (i - 1, j.wrapping_sub(1)) {
            c += 1;
        }
    }
    c
}

/// Enumerates every one-to-one alignment of exact or stem-equal words and
/// keeps the one with most exact matches, then most matches, then fewest
/// chunks.
pub fn meteor_parts(h: &[String], r: &[String]) -> MeteorParts {
    let st = Stemmer::create(Algorithm::English);
    let hs: Vec<String> = h.iter().map(|w| st.stem(w).into_owned()).collect();
    let rs: Vec<String> = r.iter().map(|w| st.stem(w).into_owned()).collect();
    let mut best: Option<MeteorParts> = None;
    let mut pairs = Vec::new();
    let mut used = vec![false; r.len()];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        i: usize,
        exact: usize,
        h: &[String],
        r: &[String],
        hs: &[String],
        rs: &[String],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut Option<MeteorParts>,
    ) {
        if i == h.len() {
            let cand = MeteorParts {
                matches: pairs.len(),
                exact,
                chunks: chunks_of(pairs),
            };
            let better = match best {
                None => true,
                Some(b) => {
                    (cand.exact, cand.matches, std::cmp::Reverse(cand.chunks))
                        > (b.exact, b.matches, std::cmp::Reverse(b.chunks))
                }
            };
            if better {
                *best = Some(cand);
            }
            return;
        }
        walk(i + 1, exact, h, r, hs, rs, used, pairs, best);
        for j in 0..r.len() {
            if used[j] || hs[i] != rs[j] {
                continue;
            }
            used[j] = true;
            pairs.push((i, j));
            walk(
                i + 1,
                exact + usize::from(h[i] == r[j]),
                h,
                r,
                hs,
                rs,
                used,
                pairs,
                best,
            );
            pairs.pop();
            used[j] = false;
        }
    }
    walk(0, 0, h, r, &hs, &rs, &mut used, &mut pairs, &mut best);
    best.expect("the empty alignment always exists")
}

pub fn meteor(h: &[String], r: &[String], alpha: f64, beta: f64, gamma: f64) -> f64 {
    let parts = meteor_parts(h, r);
    let m = parts.matches as f64;
    if parts.matches == 0 {
        return 0.0;
    }
    let p = m / h.len() as f64;
    let rc = m / r.len() as f64;
    let f = p * rc / (alpha * p + (1.0 - alpha) * rc);
    f * (1.0 - gamma * (parts.chunks as f64 / m).powf(beta))
}

/// Sample mean and `z * sd / sqrt(n)` with the n - 1 denominator, using
/// the textbook sum-of-squares form.
pub fn likert(values: &[f64], z: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let sumsq: f64 = values.iter().map(|v| v * v).sum();
    let var = (sumsq - sum * sum / n) / (n - 1.0);
    (sum / n, z * var.max(0.0).sqrt() / n.sqrt())
}
