//! Commit records and token sequences.

use std::fmt;
use std::ops::Deref;

use chrono::{DateTime, Utc};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::diff::{count_loc, parse_diff, DiffError, Language, ParsedDiff};

static SHA_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[0-9a-f]{40}$").unwrap());
static PR_REF_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"#\d+").unwrap());

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("sha {0:?} is not 40 lowercase hex characters")]
    BadSha(String),
    #[error("loc {stored} does not match the diff's changed lines ({computed})")]
    LocMismatch { stored: usize, computed: usize },
    #[error("message is not a single preprocessed line")]
    BadMessage,
    #[error("files list does not match the paths in the diff")]
    FilesMismatch,
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// One mined commit. Serialized as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub diff: String,
    pub message: String,
    pub repo_full_name: String,
    pub sha: String,
    pub author_name: String,
    pub files: Vec<String>,
    pub date: DateTime<Utc>,
    pub loc: usize,
}

impl CommitRecord {
    /// Builds a record whose `files` and `loc` are derived from `diff`.
    pub fn from_diff(
        diff: String,
        message: String,
        repo_full_name: String,
        sha: String,
        author_name: String,
        date: DateTime<Utc>,
    ) -> Result<Self, RecordError> {
        let parsed = parse_diff(&diff)?;
        Ok(CommitRecord {
            files: parsed.paths(),
            loc: count_loc(&parsed),
            diff,
            message,
            repo_full_name,
            sha,
            author_name,
            date,
        })
    }

    pub fn parsed_diff(&self) -> Result<ParsedDiff, DiffError> {
        parse_diff(&self.diff)
    }

    /// Checks every record invariant, including that the message is
    /// already preprocessed.
    pub fn validate(&self) -> Result<(), RecordError> {
        if !SHA_RE.is_match(&self.sha) {
            return Err(RecordError::BadSha(self.sha.clone()));
        }
        if self.message.contains('\n') || self.message.contains('\r') || PR_REF_RE.is_match(&self.message) {
            return Err(RecordError::BadMessage);
        }
        let parsed = self.parsed_diff()?;
        let computed = count_loc(&parsed);
        if computed != self.loc {
            return Err(RecordError::LocMismatch {
                stored: self.loc,
                computed,
            });
        }
        let mut expected = parsed.paths();
        let mut actual = self.files.clone();
        expected.sort();
        actual.sort();
        actual.dedup();
        if expected != actual {
            return Err(RecordError::FilesMismatch);
        }
        Ok(())
    }

    /// Dominant mainstream language among the touched files; ties go to
    /// the earlier language in [`Language::MAINSTREAM`].
    pub fn language(&self) -> Language {
        let mut counts = [0usize; 9];
        for f in &self.files {
            let lang = Language::from_path(f);
            if let Some(i) = Language::MAINSTREAM.iter().position(|l| *l == lang) {
                counts[i] += 1;
            }
        }
        let mut best: Option<(usize, usize)> = None;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((i, c));
            }
        }
        best.map_or(Language::Other, |(i, _)| Language::MAINSTREAM[i])
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("token {0:?} is empty or contains whitespace")]
pub struct InvalidToken(pub String);

/// Ordered tokens, none empty and none containing whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self, InvalidToken> {
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(InvalidToken(bad.clone()));
        }
        Ok(TokenSequence(tokens))
    }

    pub(crate) fn from_valid(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        TokenSequence(tokens)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl TryFrom<Vec<String>> for TokenSequence {
    type Error = InvalidToken;

    fn try_from(v: Vec<String>) -> Result<Self, InvalidToken> {
        TokenSequence::new(v)
    }
}

impl<'a> TryFrom<&[&'a str]> for TokenSequence {
    type Error = InvalidToken;

    fn try_from(v: &[&'a str]) -> Result<Self, InvalidToken> {
        TokenSequence::new(v.iter().map(|s| s.to_string()).collect())
    }
}

impl From<TokenSequence> for Vec<String> {
    fn from(t: TokenSequence) -> Vec<String> {
        t.0
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}
