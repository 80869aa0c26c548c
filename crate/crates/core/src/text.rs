//! Tokenization shared by the tagger, the injectors and the metrics.
//!
//! Text is split on whitespace and punctuation is detached into its own
//! tokens. Apostrophes and hyphens between letters stay inside a word
//! (`we’ll`, `double-check`), as do `.`, `:` and `,` between digits
//! (`6:30`, `1,000`). A run of two or more dots is one ellipsis token, and so
//! is a run of two or more hyphens.

use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
}

/// A token borrowed from its source text, with byte offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

impl Token<'_> {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    /// Lowercased form with typographic apostrophes folded to `'`.
    pub fn norm(&self) -> String {
        normalize(self.text)
    }
}

pub fn normalize(s: &str) -> String {
    s.chars()
        .map(|c| if c == '’' || c == '‘' { '\'' } else { c })
        .flat_map(char::to_lowercase)
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '’')
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind;
        if is_word_char(c) {
            kind = TokenKind::Word;
            i += 1;
            while i < chars.len() {
                let c = chars[i].1;
                if is_word_char(c) {
                    i += 1;
                    continue;
                }
                let prev = chars[i - 1].1;
                let next = chars.get(i + 1).map(|&(_, n)| n);
                let joins = match next {
                    Some(n) if is_apostrophe(c) || c == '-' => {
                        is_word_char(prev) && is_word_char(n)
                    }
                    Some(n) if matches!(c, '.' | ':' | ',') => {
                        prev.is_ascii_digit() && n.is_ascii_digit()
                    }
                    _ => false,
                };
                if joins {
                    i += 2;
                } else {
                    break;
                }
            }
        } else {
            kind = TokenKind::Punct;
            i += 1;
            if c == '.' || c == '-' {
                while i < chars.len() && chars[i].1 == c {
                    i += 1;
                }
            }
        }
        tokens.push(Token {
            text: &text[byte_at(start)..byte_at(i)],
            start: byte_at(start),
            end: byte_at(i),
            kind,
        });
    }
    tokens
}

/// Tokens as owned strings, optionally lowercased. This is the tokenization
/// used by every metric.
pub fn metric_tokens(text: &str, lowercase: bool) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .map(|t| if lowercase { t.norm() } else { t.text.to_string() })
        .collect()
}

/// Number of `char`s before byte offset `byte`.
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Byte offset of the `chars`-th character (or `text.len()` past the end).
pub fn byte_offset(text: &str, chars: usize) -> usize {
    text.char_indices()
        .nth(chars)
        .map_or(text.len(), |(b, _)| b)
}

/// True for tokens that read as a dash: em dash, en dash, or a hyphen run.
pub fn is_dash(token: &str) -> bool {
    matches!(token, "—" | "–" | "-") || (token.len() >= 2 && token.bytes().all(|b| b == b'-'))
}

/// True for ellipsis tokens (`...`, `..`, `…`).
pub fn is_ellipsis(token: &str) -> bool {
    token == "…" || (token.len() >= 2 && token.bytes().all(|b| b == b'.'))
}
