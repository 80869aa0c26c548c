//! Post-hoc disfluency injection: repetition, replacement and restart.
//!
//! Every injector returns the disfluent text together with an [`EditTrace`]
//! that replays the change on the original and undoes it on the output.
//! The `*_at` functions take every choice explicitly; the `inject_*`
//! functions draw those choices from a random source and delegate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DisfluencySpan, DisfluencyType, LexiconSet, SpanSource};
use crate::text::{byte_offset, char_offset, tokenize, Token};

/// Probability that a replacement carries a repair cue.
pub const DEFAULT_CUE_PROBABILITY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InjectError {
    #[error("input text has no tokens")]
    EmptyText,
    #[error("{0} is not applicable to this text")]
    NotApplicable(DisfluencyType),
    #[error("invalid choice: {0}")]
    InvalidChoice(String),
    #[error("edit trace does not match the text it is applied to")]
    TraceMismatch,
}

/// One string splice. `offset` is a character offset into the text as it
/// was before this edit; `position` is the token index the edit is anchored
/// to in that same text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub kind: DisfluencyType,
    pub position: usize,
    pub offset: usize,
    pub inserted: String,
    pub removed: String,
    pub inserted_tokens: Vec<String>,
    pub removed_tokens: Vec<String>,
}

impl Edit {
    fn new(kind: DisfluencyType, position: usize, text: &str, byte: usize, inserted: String, removed: String) -> Self {
        let words = |s: &str| tokenize(s).into_iter().map(|t| t.text.to_string()).collect();
        Edit {
            kind,
            position,
            offset: char_offset(text, byte),
            inserted_tokens: words(&inserted),
            removed_tokens: words(&removed),
            inserted,
            removed,
        }
    }

    fn splice(text: &str, offset: usize, take: &str, put: &str) -> Result<String, InjectError> {
        let at = byte_offset(text, offset);
        if !text[at..].starts_with(take) {
            return Err(InjectError::TraceMismatch);
        }
        let mut out = String::with_capacity(text.len() + put.len());
        out.push_str(&text[..at]);
        out.push_str(put);
        out.push_str(&text[at + take.len()..]);
        Ok(out)
    }

    pub fn apply(&self, text: &str) -> Result<String, InjectError> {
        Self::splice(text, self.offset, &self.removed, &self.inserted)
    }

    pub fn invert(&self, text: &str) -> Result<String, InjectError> {
        Self::splice(text, self.offset, &self.inserted, &self.removed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTrace {
    pub original_text: String,
    pub edits: Vec<Edit>,
}

impl EditTrace {
    /// Replays the edits on `original_text`.
    pub fn apply(&self) -> Result<String, InjectError> {
        self.edits
            .iter()
            .try_fold(self.original_text.clone(), |text, e| e.apply(&text))
    }

    /// Undoes the edits on `disfluent`, last edit first. Fails if the text
    /// does not carry the recorded insertions.
    pub fn invert(&self, disfluent: &str) -> Result<String, InjectError> {
        let text = self
            .edits
            .iter()
            .rev()
            .try_fold(disfluent.to_string(), |text, e| e.invert(&text))?;
        if text != self.original_text {
            return Err(InjectError::TraceMismatch);
        }
        Ok(text)
    }

    /// Span (in the disfluent text) marking the reparandum of each edit.
    pub fn injected_spans(&self, disfluent: &str) -> Vec<DisfluencySpan> {
        let mut spans = Vec::new();
        for e in &self.edits {
            let (start, end) = match e.kind {
                // The first copy, which sits just before the inserted one.
                DisfluencyType::Repetition => {
                    let len = e.inserted.trim_start().chars().count();
                    (e.offset - len, e.offset)
                }
                // The abandoned prefix.
                DisfluencyType::Restart => (0, e.offset),
                _ => {
                    let len = e.inserted.trim_end().chars().count();
                    (e.offset, e.offset + len)
                }
            };
            if start < end && end <= disfluent.chars().count() {
                spans.push(DisfluencySpan::new(e.kind, start, end, SpanSource::Injected));
            }
        }
        spans
    }
}

fn single(original: &str, edit: Edit) -> (String, EditTrace) {
    let trace = EditTrace {
        original_text: original.to_string(),
        edits: vec![edit],
    };
    let out = trace.apply().expect("fresh edit applies to its own source");
    (out, trace)
}

fn word_tokens(text: &str) -> Result<Vec<Token<'_>>, InjectError> {
    let toks = tokenize(text);
    if toks.is_empty() {
        return Err(InjectError::EmptyText);
    }
    Ok(toks)
}

/// Repeats `len` tokens starting at token `start`. All repeated tokens must
/// be words.
pub fn repeat_span(text: &str, start: usize, len: usize) -> Result<(String, EditTrace), InjectError> {
    let toks = word_tokens(text)?;
    let end = start + len;
    if len == 0 || end > toks.len() || !toks[start..end].iter().all(Token::is_word) {
        return Err(InjectError::InvalidChoice(format!(
            "tokens {start}..{end} are not a run of words"
        )));
    }
    let (a, b) = (toks[start].start, toks[end - 1].end);
    let inserted = format!(" {}", &text[a..b]);
    let edit = Edit::new(DisfluencyType::Repetition, start, text, b, inserted, String::new());
    Ok(single(text, edit))
}

/// Picks a run of one or two words at random and repeats it in place.
pub fn inject_repetition<R: Rng + ?Sized>(
    text: &str,
    rng: &mut R,
) -> Result<(String, EditTrace), InjectError> {
    let toks = word_tokens(text)?;
    let candidates: Vec<(usize, usize)> = (1..=2)
        .flat_map(|len| (0..toks.len()).map(move |i| (i, len)))
        .filter(|&(i, len)| i + len <= toks.len() && toks[i..i + len].iter().all(Token::is_word))
        .collect();
    let &(start, len) = candidates
        .choose(rng)
        .ok_or(InjectError::NotApplicable(DisfluencyType::Repetition))?;
    repeat_span(text, start, len)
}

/// Where the repair cue goes relative to the substitute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuePlacement {
    /// `[substitute] [cue] [original]`
    #[default]
    AfterSubstitute,
    /// `[cue] [substitute] [original]`
    BeforeSubstitute,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplacementChoice<'a> {
    /// Token index of the word being replaced.
    pub token: usize,
    pub substitute: &'a str,
    pub cue: Option<&'a str>,
    pub placement: CuePlacement,
}

/// Inserts a substitute and an optional repair cue in front of the chosen
/// word. When the word follows another word, the speaker retraces from that
/// word: `the closest` becomes `the farthest no sorry the closest`.
pub fn replace_at(text: &str, choice: &ReplacementChoice<'_>) -> Result<(String, EditTrace), InjectError> {
    let toks = word_tokens(text)?;
    let i = choice.token;
    if i >= toks.len() || !toks[i].is_word() {
        return Err(InjectError::InvalidChoice(format!("token {i} is not a word")));
    }
    if choice.substitute.trim().is_empty() {
        return Err(InjectError::InvalidChoice("empty substitute".into()));
    }
    let anchor = if i > 0 && toks[i - 1].is_word() { i - 1 } else { i };
    let context = &text[toks[anchor].start..toks[i].start];
    let mut inserted = context.to_string();
    let mut put = |s: &str| {
        inserted.push_str(s.trim());
        inserted.push(' ');
    };
    match (choice.cue, choice.placement) {
        (Some(cue), CuePlacement::AfterSubstitute) => {
            put(choice.substitute);
            put(cue);
        }
        (Some(cue), CuePlacement::BeforeSubstitute) => {
            put(cue);
            put(choice.substitute);
        }
        (None, _) => put(choice.substitute),
    }
    let at = toks[anchor].start;
    let edit = Edit::new(DisfluencyType::Replacement, anchor, text, at, inserted, String::new());
    Ok(single(text, edit))
}

/// Picks a lexicon-covered word, a synonym or antonym for it, and (with
/// probability `cue_probability`) a repair cue.
pub fn inject_replacement<R: Rng + ?Sized>(
    text: &str,
    lexicons: &LexiconSet,
    cue_probability: f64,
    placement: CuePlacement,
    rng: &mut R,
) -> Result<(String, EditTrace), InjectError> {
    let toks = word_tokens(text)?;
    let candidates: Vec<usize> = (0..toks.len())
        .filter(|&i| toks[i].is_word() && lexicons.covers(&toks[i].norm()))
        .collect();
    let &token = candidates
        .choose(rng)
        .ok_or(InjectError::NotApplicable(DisfluencyType::Replacement))?;
    let norm = toks[token].norm();
    let subs = lexicons.substitutes(&norm);
    let substitute = *subs
        .choose(rng)
        .ok_or(InjectError::NotApplicable(DisfluencyType::Replacement))?;
    let cue = if rng.gen_bool(cue_probability.clamp(0.0, 1.0)) {
        lexicons.repair_cues.choose(rng).map(String::as_str)
    } else {
        None
    };
    replace_at(
        text,
        &ReplacementChoice {
            token,
            substitute,
            cue,
            placement,
        },
    )
}

/// Cuts `first` before token `split` and continues with all of `second`.
/// `split` must fall strictly inside `first`.
pub fn restart_at(first: &str, second: &str, split: usize) -> Result<(String, EditTrace), InjectError> {
    let toks = word_tokens(first)?;
    if second.trim().is_empty() {
        return Err(InjectError::EmptyText);
    }
    if split == 0 || split >= toks.len() {
        return Err(InjectError::InvalidChoice(format!(
            "split {split} is not inside a {}-token sequence",
            toks.len()
        )));
    }
    let cut = toks[split - 1].end;
    let inserted = format!(" {}", second.trim());
    let removed = first[cut..].to_string();
    let edit = Edit::new(DisfluencyType::Restart, split, first, cut, inserted, removed);
    Ok(single(first, edit))
}

pub fn inject_restart<R: Rng + ?Sized>(
    first: &str,
    second: &str,
    rng: &mut R,
) -> Result<(String, EditTrace), InjectError> {
    let toks = word_tokens(first)?;
    if second.trim().is_empty() {
        return Err(InjectError::EmptyText);
    }
    if toks.len() < 2 {
        return Err(InjectError::NotApplicable(DisfluencyType::Restart));
    }
    let split = rng.gen_range(1..toks.len());
    restart_at(first, second, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn repetition_fixture() {
        let text = "will it be raining in the next 7 days.";
        let (out, trace) = repeat_span(text, 7, 2).unwrap();
        assert_eq!(out, "will it be raining in the next 7 days 7 days.");
        assert_eq!(trace.invert(&out).unwrap(), text);
        assert_eq!(trace.edits[0].inserted_tokens, ["7", "days"]);
    }

    #[test]
    fn single_token_repetition_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, _) = inject_repetition("stop", &mut rng).unwrap();
        assert_eq!(out, "stop stop");
        assert_eq!(inject_repetition("  ", &mut rng).unwrap_err(), InjectError::EmptyText);
        assert_eq!(
            inject_repetition("?!", &mut rng).unwrap_err(),
            InjectError::NotApplicable(DisfluencyType::Repetition)
        );
    }

    #[test]
    fn replacement_fixture() {
        let text = "show me the closest location where i can get chinese food.";
        let choice = ReplacementChoice {
            token: 6,
            substitute: "the nearest restaurant",
            cue: Some("no sorry"),
            placement: CuePlacement::AfterSubstitute,
        };
        let (out, trace) = replace_at(text, &choice).unwrap();
        assert_eq!(
            out,
            "show me the closest location where the nearest restaurant no sorry where i can get chinese food."
        );
        assert_eq!(trace.invert(&out).unwrap(), text);
    }

    #[test]
    fn replacement_retraces_previous_word() {
        let text = "show me the closest location";
        let choice = ReplacementChoice {
            token: 3,
            substitute: "farthest",
            cue: Some("no sorry"),
            placement: CuePlacement::AfterSubstitute,
        };
        let (out, trace) = replace_at(text, &choice).unwrap();
        assert_eq!(out, "show me the farthest no sorry the closest location");
        let spans = trace.injected_spans(&out);
        assert_eq!(spans[0].slice(&out), "the farthest no sorry");

        let before = ReplacementChoice {
            placement: CuePlacement::BeforeSubstitute,
            cue: Some("i mean"),
            ..choice
        };
        assert_eq!(
            replace_at(text, &before).unwrap().0,
            "show me the i mean farthest the closest location"
        );
    }

    #[test]
    fn replacement_needs_lexicon_hit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lex = LexiconSet::bundled();
        let err = inject_replacement("hello there friend", &lex, 0.8, CuePlacement::default(), &mut rng)
            .unwrap_err();
        assert_eq!(err, InjectError::NotApplicable(DisfluencyType::Replacement));
    }

    #[test]
    fn restart_fixture() {
        let first = "Set a reminder that I have a lab appointment with my aunt next Wednesday at 1pm.";
        let second = "Check to see if it will be windy in brentwood the next few days.";
        let (out, trace) = restart_at(first, second, 5).unwrap();
        assert_eq!(
            out,
            "Set a reminder that I Check to see if it will be windy in brentwood the next few days."
        );
        assert_eq!(trace.invert(&out).unwrap(), first);
        assert_eq!(trace.injected_spans(&out)[0].slice(&out), "Set a reminder that I");
    }

    #[test]
    fn two_token_restart_splits_after_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (out, trace) = inject_restart("go home", "turn left", &mut rng).unwrap();
            assert_eq!(out, "go turn left");
            assert_eq!(trace.edits[0].position, 1);
        }
        assert_eq!(inject_restart("", "x", &mut rng).unwrap_err(), InjectError::EmptyText);
        assert_eq!(inject_restart("x y", " ", &mut rng).unwrap_err(), InjectError::EmptyText);
    }

    #[test]
    fn invert_rejects_foreign_text() {
        let (_, trace) = repeat_span("a b c", 1, 1).unwrap();
        assert_eq!(trace.invert("a c c").unwrap_err(), InjectError::TraceMismatch);
    }
}
