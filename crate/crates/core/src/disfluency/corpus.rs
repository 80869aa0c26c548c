use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inject::{inject_repetition, inject_replacement, inject_restart};
use super::{
    tag_disfluencies, CuePlacement, DisfluencySpan, EditTrace, InjectError, LexiconSet,
    DEFAULT_CUE_PROBABILITY,
};
use crate::corpus::{Corpus, Speaker};
use crate::rng::stream_rng;

pub const EDIT_TRACES_KEY: &str = "edit_traces";
pub const INJECTION_KEY: &str = "injection";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectOp {
    Repetition,
    Replacement,
    Restart,
}

impl InjectOp {
    pub const ALL: [InjectOp; 3] = [InjectOp::Repetition, InjectOp::Replacement, InjectOp::Restart];

    pub fn as_str(self) -> &'static str {
        match self {
            InjectOp::Repetition => "repetition",
            InjectOp::Replacement => "replacement",
            InjectOp::Restart => "restart",
        }
    }
}

impl std::str::FromStr for InjectOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InjectOp::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| format!("unknown injection op `{s}`"))
    }
}

/// Which driver turns to modify and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    /// Probability that a driver turn is modified.
    pub rate: f64,
    /// Relative weight of each op when a turn is modified.
    pub ops: BTreeMap<InjectOp, f64>,
    pub cue_probability: f64,
    pub cue_placement: CuePlacement,
}

impl InjectionPlan {
    pub fn new(rate: f64, ops: impl IntoIterator<Item = InjectOp>) -> Self {
        InjectionPlan {
            rate,
            ops: ops.into_iter().map(|op| (op, 1.0)).collect(),
            cue_probability: DEFAULT_CUE_PROBABILITY,
            cue_placement: CuePlacement::default(),
        }
    }
}

/// Where one edit trace applies, plus what it replaced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub dialog_id: String,
    pub turn_index: usize,
    pub trace: EditTrace,
    pub original_spans: Vec<DisfluencySpan>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionStats {
    pub driver_turns: usize,
    pub modified: BTreeMap<InjectOp, usize>,
    /// Draws that picked an op the turn could not take.
    pub skipped: BTreeMap<InjectOp, usize>,
}

impl InjectionStats {
    pub fn modified_total(&self) -> usize {
        self.modified.values().sum()
    }

    fn merge(&mut self, other: InjectionStats) {
        self.driver_turns += other.driver_turns;
        for (op, n) in other.modified {
            *self.modified.entry(op).or_default() += n;
        }
        for (op, n) in other.skipped {
            *self.skipped.entry(op).or_default() += n;
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InjectCorpusError {
    #[error("injection plan needs at least one op with positive weight")]
    NoOps,
    #[error("rate must lie in [0, 1], got {0}")]
    Rate(f64),
    #[error("corpus already carries edit traces; revert it first")]
    AlreadyInjected,
    #[error("provenance has no readable edit traces")]
    NoTraces,
    #[error("trace for dialog `{dialog}` turn {turn} does not match the corpus: {source}")]
    Mismatch {
        dialog: String,
        turn: usize,
        #[source]
        source: InjectError,
    },
}

/// Applies post-hoc disfluencies to driver turns. Car-AI turns are never
/// touched. Each dialog draws from its own stream derived from `seed` and
/// its position, so the result does not depend on scheduling.
pub fn inject_corpus(
    corpus: &Corpus,
    plan: &InjectionPlan,
    lexicons: &LexiconSet,
    seed: u64,
) -> Result<(Corpus, InjectionStats), InjectCorpusError> {
    if !(0.0..=1.0).contains(&plan.rate) {
        return Err(InjectCorpusError::Rate(plan.rate));
    }
    if corpus.provenance.contains_key(EDIT_TRACES_KEY) {
        return Err(InjectCorpusError::AlreadyInjected);
    }
    let ops: Vec<(InjectOp, f64)> = plan
        .ops
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(&op, &w)| (op, w))
        .collect();
    if ops.is_empty() {
        return Err(InjectCorpusError::NoOps);
    }
    let weights = WeightedIndex::new(ops.iter().map(|(_, w)| *w)).map_err(|_| InjectCorpusError::NoOps)?;

    let results: Vec<_> = corpus
        .dialogs
        .par_iter()
        .enumerate()
        .map(|(di, dialog)| {
            let mut rng = stream_rng(seed, di as u64);
            let mut dialog = dialog.clone();
            let mut records = Vec::new();
            let mut stats = InjectionStats::default();
            let originals: Vec<(usize, String)> = dialog
                .turns
                .iter()
                .enumerate()
                .filter(|(_, t)| t.speaker == Speaker::Driver)
                .map(|(i, t)| (i, t.text.clone()))
                .collect();
            for &(ti, ref text) in &originals {
                stats.driver_turns += 1;
                if !rng.gen_bool(plan.rate) {
                    continue;
                }
                let op = ops[weights.sample(&mut rng)].0;
                let result = match op {
                    InjectOp::Repetition => inject_repetition(text, &mut rng),
                    InjectOp::Replacement => inject_replacement(
                        text,
                        lexicons,
                        plan.cue_probability,
                        plan.cue_placement,
                        &mut rng,
                    ),
                    InjectOp::Restart => {
                        let others: Vec<&str> = originals
                            .iter()
                            .filter(|(j, _)| *j != ti)
                            .map(|(_, t)| t.as_str())
                            .collect();
                        match others.choose(&mut rng) {
                            Some(second) => inject_restart(text, second, &mut rng),
                            None => Err(InjectError::NotApplicable(super::DisfluencyType::Restart)),
                        }
                    }
                };
                let Ok((new_text, trace)) = result else {
                    *stats.skipped.entry(op).or_default() += 1;
                    continue;
                };
                let turn = &mut dialog.turns[ti];
                let injected = trace.injected_spans(&new_text);
                let mut spans: Vec<DisfluencySpan> = tag_disfluencies(&new_text, lexicons)
                    .into_iter()
                    .filter(|s| injected.iter().all(|i| !i.overlaps(s)))
                    .collect();
                spans.extend(injected);
                spans.sort_by_key(|s| s.start);
                records.push(TraceRecord {
                    dialog_id: dialog.id.clone(),
                    turn_index: ti,
                    trace,
                    original_spans: std::mem::replace(&mut turn.disfluency_spans, spans),
                });
                turn.text = new_text;
                *stats.modified.entry(op).or_default() += 1;
            }
            (dialog, records, stats)
        })
        .collect();

    let mut out = Corpus {
        dialogs: Vec::with_capacity(results.len()),
        provenance: corpus.provenance.clone(),
    };
    let mut all_records = Vec::new();
    let mut stats = InjectionStats::default();
    for (dialog, records, s) in results {
        out.dialogs.push(dialog);
        all_records.extend(records);
        stats.merge(s);
    }
    out.provenance.insert(
        EDIT_TRACES_KEY.into(),
        serde_json::to_value(&all_records).expect("trace records serialize"),
    );
    out.provenance.insert(
        INJECTION_KEY.into(),
        serde_json::json!({ "seed": seed, "plan": plan }),
    );
    Ok((out, stats))
}

/// Undoes [`inject_corpus`] using the traces stored in provenance.
pub fn revert_injection(corpus: &Corpus) -> Result<Corpus, InjectCorpusError> {
    let records: Vec<TraceRecord> = corpus
        .provenance
        .get(EDIT_TRACES_KEY)
        .cloned()
        .and_then(|v| serde_json::from_value(v).ok())
        .ok_or(InjectCorpusError::NoTraces)?;
    let mut out = corpus.clone();
    out.provenance.remove(EDIT_TRACES_KEY);
    out.provenance.remove(INJECTION_KEY);
    let index: BTreeMap<String, usize> = out
        .dialogs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.clone(), i))
        .collect();
    for rec in records.iter().rev() {
        let mismatch = |source| InjectCorpusError::Mismatch {
            dialog: rec.dialog_id.clone(),
            turn: rec.turn_index,
            source,
        };
        let di = *index
            .get(&rec.dialog_id)
            .ok_or_else(|| mismatch(InjectError::TraceMismatch))?;
        let turn = out.dialogs[di]
            .turns
            .get_mut(rec.turn_index)
            .ok_or_else(|| mismatch(InjectError::TraceMismatch))?;
        turn.text = rec.trace.invert(&turn.text).map_err(mismatch)?;
        turn.disfluency_spans = rec.original_spans.clone();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_to_jsonl, fixtures, DomainTag};

    fn corpus() -> Corpus {
        let mut c = Corpus::new(
            (0..10)
                .map(|i| fixtures::dialog(&format!("d{i}"), DomainTag::ALL[i % 7], 6 + 2 * (i % 5)))
                .collect(),
        );
        c.provenance.insert("seed".into(), serde_json::json!(3));
        c
    }

    #[test]
    fn rate_zero_changes_nothing() {
        let c = corpus();
        let (out, stats) = inject_corpus(&c, &InjectionPlan::new(0.0, InjectOp::ALL), &LexiconSet::bundled(), 1).unwrap();
        assert_eq!(out.dialogs, c.dialogs);
        assert_eq!(stats.modified_total(), 0);
    }

    #[test]
    fn rate_one_repetition_touches_every_driver_turn_only() {
        let c = corpus();
        let plan = InjectionPlan::new(1.0, [InjectOp::Repetition]);
        let (out, stats) = inject_corpus(&c, &plan, &LexiconSet::bundled(), 5).unwrap();
        assert_eq!(stats.modified_total(), stats.driver_turns);
        for (a, b) in c.dialogs.iter().zip(&out.dialogs) {
            for (ta, tb) in a.turns.iter().zip(&b.turns) {
                match ta.speaker {
                    Speaker::Driver => assert_ne!(ta.text, tb.text),
                    Speaker::CarAi => assert_eq!(ta, tb),
                }
            }
        }
        let again = inject_corpus(&c, &plan, &LexiconSet::bundled(), 5).unwrap().0;
        assert_eq!(again, out);
    }

    #[test]
    fn revert_is_byte_identical() {
        let c = corpus();
        let plan = InjectionPlan::new(0.7, InjectOp::ALL);
        let (out, _) = inject_corpus(&c, &plan, &LexiconSet::bundled(), 9).unwrap();
        assert!(matches!(
            inject_corpus(&out, &plan, &LexiconSet::bundled(), 9),
            Err(InjectCorpusError::AlreadyInjected)
        ));
        let back = revert_injection(&out).unwrap();
        assert_eq!(corpus_to_jsonl(&back).unwrap(), corpus_to_jsonl(&c).unwrap());
    }

    #[test]
    fn plan_errors() {
        let c = corpus();
        let lex = LexiconSet::bundled();
        assert!(matches!(inject_corpus(&c, &InjectionPlan::new(1.5, InjectOp::ALL), &lex, 0), Err(InjectCorpusError::Rate(_))));
        assert!(matches!(inject_corpus(&c, &InjectionPlan::new(1.0, []), &lex, 0), Err(InjectCorpusError::NoOps)));
        assert!(matches!(revert_injection(&c), Err(InjectCorpusError::NoTraces)));
    }
}
