use std::ops::Range;

use super::{DisfluencySpan, DisfluencyType, LexiconSet, SpanSource};
use crate::text::{char_offset, is_dash, is_ellipsis, tokenize, Token};

const MAX_REPEAT_NGRAM: usize = 4;
const FALSE_START_LOOKAHEAD: usize = 3;
const RESTART_MARKERS: [&str; 3] = ["actually", "wait", "let's"];

fn phrase_words(phrase: &str) -> Vec<String> {
    tokenize(phrase)
        .into_iter()
        .filter(Token::is_word)
        .map(|t| t.norm())
        .collect()
}

struct Tokens<'a> {
    toks: Vec<Token<'a>>,
    norms: Vec<String>,
}

impl Tokens<'_> {
    fn is(&self, i: usize, s: &str) -> bool {
        self.norms.get(i).is_some_and(|n| n == s)
    }

    /// Matches `words` starting at token `i`; with `commas` set, commas may
    /// sit between the words. Returns the index of the last matched token.
    fn match_phrase(&self, i: usize, words: &[String], commas: bool) -> Option<usize> {
        let mut j = i;
        for (k, w) in words.iter().enumerate() {
            if k > 0 {
                j += 1;
                while commas && self.is(j, ",") {
                    j += 1;
                }
            }
            let t = self.toks.get(j)?;
            if !t.is_word() || self.norms[j] != *w {
                return None;
            }
        }
        Some(j)
    }

    fn bytes(&self, first: usize, last: usize) -> Range<usize> {
        self.toks[first].start..self.toks[last].end
    }

    fn is_boundary(&self, i: usize) -> bool {
        let t = self.toks[i].text;
        matches!(t, "." | "!" | "?" | ";") || is_dash(t) || is_ellipsis(t)
    }
}

#[derive(Default)]
struct Accepted(Vec<(Range<usize>, DisfluencyType)>);

impl Accepted {
    /// Keeps the span unless it overlaps one accepted by an earlier rule.
    fn offer(&mut self, range: Range<usize>, kind: DisfluencyType) {
        if range.is_empty() {
            return;
        }
        if self
            .0
            .iter()
            .all(|(r, _)| range.end <= r.start || r.end <= range.start)
        {
            self.0.push((range, kind));
        }
    }
}

/// Tags disfluencies with five ordered rules: fillers, pauses, repetitions,
/// repair cues (corrections) and dash-marked false starts. When two rules
/// claim overlapping text the earlier rule wins.
pub fn tag_disfluencies(text: &str, lexicons: &LexiconSet) -> Vec<DisfluencySpan> {
    let toks = tokenize(text);
    let norms = toks.iter().map(Token::norm).collect();
    let t = Tokens { toks, norms };
    let n = t.toks.len();
    let mut acc = Accepted::default();

    // Fillers. Weak fillers need a comma after them and a comma or clause
    // start before them.
    let strong: Vec<Vec<String>> = lexicons.fillers.iter().map(|f| phrase_words(f)).collect();
    let weak: Vec<Vec<String>> = lexicons
        .weak_fillers
        .iter()
        .map(|f| phrase_words(f))
        .collect();
    for i in 0..n {
        if !t.toks[i].is_word() {
            continue;
        }
        for words in strong.iter().filter(|w| !w.is_empty()) {
            if let Some(last) = t.match_phrase(i, words, false) {
                acc.offer(t.bytes(i, last), DisfluencyType::Filler);
            }
        }
        for words in weak.iter().filter(|w| !w.is_empty()) {
            if let Some(last) = t.match_phrase(i, words, false) {
                let opened = i == 0 || t.is(i - 1, ",") || t.is_boundary(i - 1);
                if opened && t.is(last + 1, ",") {
                    acc.offer(t.bytes(i, last), DisfluencyType::Filler);
                }
            }
        }
    }

    // Pauses.
    for (i, tok) in t.toks.iter().enumerate() {
        if is_ellipsis(tok.text) {
            acc.offer(t.bytes(i, i), DisfluencyType::Pause);
        }
    }

    // Repetitions: a word n-gram immediately followed by itself, ignoring
    // case and punctuation. The span covers the first copy together with
    // any punctuation before the second copy ("I think," in "I think, I think").
    let words: Vec<usize> = (0..n).filter(|&i| t.toks[i].is_word()).collect();
    let mut w = 0;
    while w < words.len() {
        let found = (1..=MAX_REPEAT_NGRAM).rev().find(|&len| {
            w + 2 * len <= words.len()
                && (0..len).all(|k| t.norms[words[w + k]] == t.norms[words[w + len + k]])
        });
        match found {
            Some(len) => {
                let first = words[w];
                let last = words[w + len] - 1;
                acc.offer(t.bytes(first, last), DisfluencyType::Repetition);
                w += len;
            }
            None => w += 1,
        }
    }

    // Corrections: repair-cue phrases, commas allowed between cue words.
    let mut cues: Vec<Vec<String>> = lexicons.repair_cues.iter().map(|c| phrase_words(c)).collect();
    cues.retain(|c| !c.is_empty());
    cues.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let cue_at = |i: usize| cues.iter().find_map(|c| t.match_phrase(i, c, true));
    for i in 0..n {
        if let Some(last) = cue_at(i) {
            acc.offer(t.bytes(i, last), DisfluencyType::Correction);
        }
    }

    // False starts: a clause cut off by a dash and followed, within a few
    // words, by a restart marker or a repair cue.
    for d in 0..n {
        if !is_dash(t.toks[d].text) {
            continue;
        }
        let restarted = (d + 1..n)
            .filter(|&j| t.toks[j].is_word())
            .take(FALSE_START_LOOKAHEAD)
            .any(|j| RESTART_MARKERS.contains(&t.norms[j].as_str()) || cue_at(j).is_some());
        if !restarted {
            continue;
        }
        let mut start = d;
        while start > 0 && !t.is_boundary(start - 1) {
            start -= 1;
        }
        if start < d {
            acc.offer(t.bytes(start, d), DisfluencyType::FalseStart);
        }
    }

    let mut spans: Vec<DisfluencySpan> = acc
        .0
        .into_iter()
        .map(|(r, kind)| {
            DisfluencySpan::new(
                kind,
                char_offset(text, r.start),
                char_offset(text, r.end),
                SpanSource::Tagged,
            )
        })
        .collect();
    spans.sort_by_key(|s| s.start);
    spans
}
