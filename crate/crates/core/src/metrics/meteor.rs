use std::collections::HashMap;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use super::{MetricError, MetricParams};

/// Search nodes explored per sentence pair before settling for the best
/// alignment found so far.
const NODE_BUDGET: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStage {
    Exact,
    Stem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `(hypothesis index, reference index, stage)`, ordered by hypothesis.
    pub pairs: Vec<(usize, usize, MatchStage)>,
    pub chunks: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeteorDetail {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

fn stemmer() -> &'static Stemmer {
    static S: OnceLock<Stemmer> = OnceLock::new();
    S.get_or_init(|| Stemmer::create(Algorithm::English))
}

fn multiset<'a, I: IntoIterator<Item = &'a str>>(it: I) -> HashMap<&'a str, usize> {
    let mut m = HashMap::new();
    for s in it {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

struct Search<'a> {
    hyp: &'a [String],
    cands: Vec<Vec<(usize, MatchStage)>>,
    m1: usize,
    target: usize,
    used: Vec<bool>,
    assign: Vec<Option<(usize, MatchStage)>>,
    best: Vec<Option<(usize, MatchStage)>>,
    best_links: Option<usize>,
    nodes: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, exact: usize, total: usize, links: usize) {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return;
        }
        let h = self.hyp.len();
        if i == h {
            if exact == self.m1 && total == self.target && self.best_links.is_none_or(|b| links > b) {
                self.best_links = Some(links);
                self.best.clone_from(&self.assign);
            }
            return;
        }
        let remaining = h - i;
        let need = self.target - total;
        if need > remaining || self.m1 - exact > remaining {
            return;
        }
        if self.best_links.is_some_and(|b| links + need <= b) {
            return;
        }
        let prev = if i > 0 { self.assign[i - 1].map(|(j, _)| j) } else { None };
        let mut order: Vec<(usize, MatchStage)> = Vec::with_capacity(self.cands[i].len());
        if let Some(p) = prev {
            if let Some(&c) = self.cands[i].iter().find(|(j, _)| *j == p + 1) {
                order.push(c);
            }
        }
        for &c in &self.cands[i] {
            if Some(c.0) != prev.map(|p| p + 1) {
                order.push(c);
            }
        }
        for (j, stage) in order {
            if self.used[j] {
                continue;
            }
            let is_exact = stage == MatchStage::Exact;
            if is_exact && exact == self.m1 {
                continue;
            }
            if need == 0 {
                break;
            }
            self.used[j] = true;
            self.assign[i] = Some((j, stage));
            let link = usize::from(prev.is_some_and(|p| p + 1 == j));
            self.run(i + 1, exact + usize::from(is_exact), total + 1, links + link);
            self.assign[i] = None;
            self.used[j] = false;
        }
        if need < remaining {
            self.run(i + 1, exact, total, links);
        }
    }
}

fn count_chunks(pairs: &[(usize, usize, MatchStage)]) -> usize {
    let mut chunks = 0;
    let mut last: Option<(usize, usize)> = None;
    for &(i, j, _) in pairs {
        if last.is_none_or(|(pi, pj)| pi + 1 != i || pj + 1 != j) {
            chunks += 1;
        }
        last = Some((i, j));
    }
    chunks
}

/// Staged unigram alignment: a maximum set of exact matches first, then a
/// maximum set of stem matches among the leftovers. Among all alignments
/// with those match counts, one with the fewest chunks is chosen.
pub fn align(hyp: &[String], reference: &[String]) -> Alignment {
    let st = stemmer();
    let hs: Vec<String> = hyp.iter().map(|t| st.stem(t).into_owned()).collect();
    let rs: Vec<String> = reference.iter().map(|t| st.stem(t).into_owned()).collect();

    let hc = multiset(hyp.iter().map(String::as_str));
    let rc = multiset(reference.iter().map(String::as_str));
    let mut m1 = 0;
    let mut h_left: HashMap<&str, usize> = HashMap::new();
    let mut r_left: HashMap<&str, usize> = HashMap::new();
    for (w, &c) in &hc {
        let k = c.min(rc.get(w).copied().unwrap_or(0));
        m1 += k;
        if c > k {
            let stem = &hs[hyp.iter().position(|t| t == w).unwrap()];
            *h_left.entry(stem.as_str()).or_default() += c - k;
        }
    }
    for (w, &c) in &rc {
        let k = c.min(hc.get(w).copied().unwrap_or(0));
        if c > k {
            let stem = &rs[reference.iter().position(|t| t == w).unwrap()];
            *r_left.entry(stem.as_str()).or_default() += c - k;
        }
    }
    let m2: usize = h_left
        .iter()
        .map(|(s, &c)| c.min(r_left.get(s).copied().unwrap_or(0)))
        .sum();

    let cands: Vec<Vec<(usize, MatchStage)>> = hyp
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut v: Vec<_> = reference
                .iter()
                .enumerate()
                .filter(|(_, r)| *r == t)
                .map(|(j, _)| (j, MatchStage::Exact))
                .collect();
            v.extend(
                reference
                    .iter()
                    .enumerate()
                    .filter(|(j, r)| *r != t && rs[*j] == hs[i])
                    .map(|(j, _)| (j, MatchStage::Stem)),
            );
            v
        })
        .collect();

    let mut search = Search {
        hyp,
        cands,
        m1,
        target: m1 + m2,
        used: vec![false; reference.len()],
        assign: vec![None; hyp.len()],
        best: vec![None; hyp.len()],
        best_links: None,
        nodes: 0,
    };
    search.run(0, 0, 0, 0);
    let assign = if search.best_links.is_some() {
        search.best
    } else {
        greedy(hyp, reference, &search.cands)
    };
    let pairs: Vec<_> = assign
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.map(|(j, s)| (i, j, s)))
        .collect();
    let chunks = count_chunks(&pairs);
    Alignment { pairs, chunks }
}

/// Left-to-right staged matching. Always reaches the maximum counts for
/// both stages since matches within a word (or stem) class are
/// interchangeable.
fn greedy(
    hyp: &[String],
    reference: &[String],
    cands: &[Vec<(usize, MatchStage)>],
) -> Vec<Option<(usize, MatchStage)>> {
    let mut used = vec![false; reference.len()];
    let mut assign = vec![None; hyp.len()];
    for stage in [MatchStage::Exact, MatchStage::Stem] {
        for (i, c) in cands.iter().enumerate() {
            if assign[i].is_some() {
                continue;
            }
            if let Some(&(j, s)) = c.iter().find(|(j, s)| *s == stage && !used[*j]) {
                used[j] = true;
                assign[i] = Some((j, s));
            }
        }
    }
    assign
}

/// Sentence-level METEOR in `[0, 1]`.
pub fn meteor(hyp: &[String], reference: &[String], params: &MetricParams) -> MeteorDetail {
    let a = align(hyp, reference);
    let m = a.pairs.len();
    if m == 0 {
        return MeteorDetail {
            matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
            score: 0.0,
        };
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let alpha = params.meteor_alpha;
    let fmean = if p == r {
        p
    } else {
        p * r / (alpha * p + (1.0 - alpha) * r)
    };
    let penalty = params.meteor_gamma * (a.chunks as f64 / m as f64).powf(params.meteor_beta);
    MeteorDetail {
        matches: m,
        chunks: a.chunks,
        precision: p,
        recall: r,
        fmean,
        penalty,
        score: fmean * (1.0 - penalty),
    }
}

/// Mean sentence METEOR over aligned pairs.
pub fn meteor_corpus(
    hyps: &[Vec<String>],
    refs: &[Vec<String>],
    params: &MetricParams,
) -> Result<f64, MetricError> {
    params.validate()?;
    if hyps.len() != refs.len() || hyps.is_empty() {
        return Err(MetricError::Argument(format!(
            "need equal, non-zero pair counts; got {} and {}",
            hyps.len(),
            refs.len()
        )));
    }
    let sum: f64 = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| meteor(h, r, params).score)
        .sum();
    Ok(sum / hyps.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_is_one_chunk() {
        let h = toks("the the cat sat on the the mat");
        let d = meteor(&h, &h, &MetricParams::default());
        assert_eq!(d.chunks, 1);
        assert_eq!(d.score, 1.0 - 0.5 * (1.0f64 / 8.0).powf(3.0));
    }

    #[test]
    fn stem_stage_after_exact() {
        let a = align(&toks("runs runs"), &toks("runs running"));
        assert_eq!(a.pairs.len(), 2);
        assert_eq!(a.pairs.iter().filter(|p| p.2 == MatchStage::Exact).count(), 1);
        // A stem match must not steal the reference token an exact match needs.
        let a = align(&toks("runs run"), &toks("run"));
        assert_eq!(a.pairs, vec![(1, 0, MatchStage::Exact)]);
    }

    #[test]
    fn fewest_chunks_chosen() {
        // Greedy would align the first "the" to ref 0 and split into chunks.
        let a = align(&toks("the cat"), &toks("the dog the cat"));
        assert_eq!(a.pairs, vec![(0, 2, MatchStage::Exact), (1, 3, MatchStage::Exact)]);
        assert_eq!(a.chunks, 1);
    }

    #[test]
    fn no_overlap_scores_zero() {
        let d = meteor(&toks("a b"), &toks("c d"), &MetricParams::default());
        assert_eq!(d.score, 0.0);
        assert_eq!(meteor(&[], &toks("c"), &MetricParams::default()).score, 0.0);
    }
}
