//! Disfluency taxonomy, the rule-based tagger, and post-hoc injection with
//! invertible edit traces.

mod corpus;
mod inject;
mod lexicon;
mod tagger;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use corpus::{
    inject_corpus, revert_injection, InjectCorpusError, InjectOp, InjectionPlan, InjectionStats,
    TraceRecord, EDIT_TRACES_KEY, INJECTION_KEY,
};
pub use inject::{
    inject_repetition, inject_replacement, inject_restart, repeat_span, replace_at, restart_at,
    CuePlacement, Edit, EditTrace, InjectError, ReplacementChoice, DEFAULT_CUE_PROBABILITY,
};
pub use lexicon::{LexiconError, LexiconSet};
pub use tagger::tag_disfluencies;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisfluencyType {
    Repetition,
    FalseStart,
    Filler,
    Pause,
    Correction,
    /// Injection-only kinds.
    Replacement,
    Restart,
}

impl DisfluencyType {
    /// The five categories a generated driver turn may contain.
    pub const TAXONOMY: [DisfluencyType; 5] = [
        DisfluencyType::Repetition,
        DisfluencyType::FalseStart,
        DisfluencyType::Filler,
        DisfluencyType::Pause,
        DisfluencyType::Correction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DisfluencyType::Repetition => "repetition",
            DisfluencyType::FalseStart => "false_start",
            DisfluencyType::Filler => "filler",
            DisfluencyType::Pause => "pause",
            DisfluencyType::Correction => "correction",
            DisfluencyType::Replacement => "replacement",
            DisfluencyType::Restart => "restart",
        }
    }
}

impl fmt::Display for DisfluencyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanSource {
    Tagged,
    Injected,
}

/// A typed region of a turn's text. Offsets are half-open and count
/// characters, not bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DisfluencySpan {
    pub kind: DisfluencyType,
    pub start: usize,
    pub end: usize,
    pub source: SpanSource,
}

impl DisfluencySpan {
    pub fn new(kind: DisfluencyType, start: usize, end: usize, source: SpanSource) -> Self {
        DisfluencySpan {
            kind,
            start,
            end,
            source,
        }
    }

    pub fn overlaps(&self, other: &DisfluencySpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// The covered slice of `text`.
    pub fn slice<'t>(&self, text: &'t str) -> &'t str {
        let a = crate::text::byte_offset(text, self.start);
        let b = crate::text::byte_offset(text, self.end);
        &text[a..b]
    }
}
