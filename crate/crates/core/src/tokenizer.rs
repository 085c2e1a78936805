//! Code-aware tokenizer used by every metric and by corpus statistics.
//!
//! The base pass follows the `13a` convention of isolating punctuation;
//! the enhancement pass then splits on every remaining symbol, decomposes
//! camelCase and acronym runs, and lowercases.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::commit::TokenSequence;

// 13a rules, applied in order to the space-padded line.
static PUNCT: Lazy<Regex> = Lazy::new(|| Regex::new(r"([\{-\~\[-` -\&\(-\+:-@/])").unwrap());
static PERIOD_COMMA_AFTER_NON_DIGIT: Lazy<Regex> = Lazy::new(|| Regex::new(r"([^0-9])([\.,])").unwrap());
static PERIOD_COMMA_BEFORE_NON_DIGIT: Lazy<Regex> = Lazy::new(|| Regex::new(r"([\.,])([^0-9])").unwrap());
static DASH_AFTER_DIGIT: Lazy<Regex> = Lazy::new(|| Regex::new(r"([0-9])(-)").unwrap());

/// Tokenizer settings. The default keeps symbol tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tokenizer {
    /// Discard symbol tokens after segmentation, so `bug-fix` becomes
    /// `[bug, fix]` instead of `[bug, -, fix]`.
    pub drop_symbols: bool,
}

impl Tokenizer {
    pub fn new() -> Self {
        Tokenizer::default()
    }

    pub fn dropping_symbols() -> Self {
        Tokenizer { drop_symbols: true }
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        self.enhance(&base_tokenize(text))
    }

    pub fn enhance(&self, tokens: &TokenSequence) -> TokenSequence {
        let mut out = Vec::with_capacity(tokens.len() * 2);
        for token in tokens.iter() {
            let mut run = String::new();
            for c in token.chars() {
                if c.is_alphanumeric() {
                    run.push(c);
                    continue;
                }
                flush_run(&mut run, &mut out);
                if !self.drop_symbols && !c.is_whitespace() {
                    out.push(lower(c.encode_utf8(&mut [0; 4])));
                }
            }
            flush_run(&mut run, &mut out);
        }
        TokenSequence::from_valid(out)
    }
}

fn lower(s: &str) -> String {
    s.to_lowercase()
}

fn flush_run(run: &mut String, out: &mut Vec<String>) {
    if run.is_empty() {
        return;
    }
    for piece in split_camel(run) {
        out.push(lower(piece));
    }
    run.clear();
}

/// Splits an alphanumeric run at `aB` boundaries and before the last
/// capital of an acronym followed by lowercase (`XMLParser` -> `XML`, `Parser`).
fn split_camel(run: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = run.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let (prev, cur) = (chars[i - 1].1, chars[i].1);
        let lower_to_upper = prev.is_lowercase() && cur.is_uppercase();
        let acronym_end =
            prev.is_uppercase() && cur.is_uppercase() && chars.get(i + 1).is_some_and(|(_, next)| next.is_lowercase());
        if lower_to_upper || acronym_end {
            let at = chars[i].0;
            pieces.push(&run[start..at]);
            start = at;
        }
    }
    pieces.push(&run[start..]);
    pieces
}

/// Punctuation-aware whitespace split; case is preserved.
pub fn base_tokenize(text: &str) -> TokenSequence {
    let padded = format!(" {text} ");
    let s = PUNCT.replace_all(&padded, " $1 ");
    let s = PERIOD_COMMA_AFTER_NON_DIGIT.replace_all(&s, "$1 $2 ");
    let s = PERIOD_COMMA_BEFORE_NON_DIGIT.replace_all(&s, " $1 $2");
    let s = DASH_AFTER_DIGIT.replace_all(&s, "$1 $2 ");
    TokenSequence::from_valid(s.split_whitespace().map(str::to_string).collect())
}

/// Symbol segmentation, camelCase decomposition and lowercasing.
pub fn enhance(tokens: &TokenSequence) -> TokenSequence {
    Tokenizer::default().enhance(tokens)
}

/// `enhance(base_tokenize(text))`.
pub fn tokenize(text: &str) -> TokenSequence {
    Tokenizer::default().tokenize(text)
}
