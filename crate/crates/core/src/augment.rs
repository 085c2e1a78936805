//! Prompt construction from a query diff and retrieved example pairs.
//!
//! Templates are plain text. The example block is delimited by
//! `{{#examples}}` and `{{/examples}}` and is repeated once per example with
//! `{{retrieved_diff}}` and `{{retrieved_msg}}` filled in; `{{query_diff}}`
//! must appear once, after the example block. Rendering with no examples
//! drops the block entirely, which gives the direct prompt.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::retriever::ExamplePair;
use crate::scalar::Scalar;

pub const DEFAULT_TEMPLATE: &str = include_str!("../templates/default.txt");
pub const DEFAULT_MAX_PROMPT_CHARS: usize = 48_000;
pub const MAX_EXAMPLES: usize = 5;

const QUERY_DIFF: &str = "{{query_diff}}";
const RETRIEVED_DIFF: &str = "{{retrieved_diff}}";
const RETRIEVED_MSG: &str = "{{retrieved_msg}}";
const OPEN: &str = "{{#examples}}";
const CLOSE: &str = "{{/examples}}";

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("query diff is empty")]
    EmptyQuery,
    #[error("at most {max} examples are supported, got {got}")]
    TooManyExamples { got: usize, max: usize },
    #[error("invalid template: {0}")]
    Template(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    QueryDiff,
    RetrievedDiff,
    RetrievedMsg,
}

fn segments(text: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let slot = [
            (QUERY_DIFF, Segment::QueryDiff),
            (RETRIEVED_DIFF, Segment::RetrievedDiff),
            (RETRIEVED_MSG, Segment::RetrievedMsg),
        ]
        .into_iter()
        .find(|(name, _)| rest[start..].starts_with(name));
        match slot {
            Some((name, seg)) => {
                if start > 0 {
                    out.push(Segment::Text(rest[..start].to_string()));
                }
                out.push(seg);
                rest = &rest[start + name.len()..];
            }
            None => {
                out.push(Segment::Text(rest[..start + 2].to_string()));
                rest = &rest[start + 2..];
            }
        }
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest.to_string()));
    }
    out
}

/// Byte range around the marker at `at`. A marker alone on its line takes
/// its line break with it, so block lines leave no blank lines behind.
fn standalone(text: &str, at: usize, len: usize) -> (usize, usize) {
    let end = at + len;
    let line_start = at == 0 || text[..at].ends_with('\n');
    let rest = &text[end..];
    let eol = if rest.starts_with("\r\n") {
        2
    } else {
        usize::from(rest.starts_with('\n'))
    };
    if line_start && (eol > 0 || rest.is_empty()) {
        (at, end + eol)
    } else {
        (at, end)
    }
}

fn count(segs: &[Segment], which: &Segment) -> usize {
    segs.iter().filter(|s| *s == which).count()
}

/// Order in which example blocks are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleOrder {
    /// Least relevant first, so the best example sits next to the query.
    #[default]
    Ascending,
    Descending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    source: String,
    preamble: Vec<Segment>,
    example: Vec<Segment>,
    query: Vec<Segment>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::parse(DEFAULT_TEMPLATE).expect("built-in template is valid")
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, AugmentError> {
        let err = |m: &str| Err(AugmentError::Template(m.to_string()));
        let (Some(open), Some(close)) = (text.find(OPEN), text.find(CLOSE)) else {
            return err("missing {{#examples}} ... {{/examples}} block");
        };
        if close < open || text.matches(OPEN).count() != 1 || text.matches(CLOSE).count() != 1 {
            return err("exactly one {{#examples}} ... {{/examples}} block is required");
        }
        let (before, inner_start) = standalone(text, open, OPEN.len());
        let (inner_end, after) = standalone(text, close, CLOSE.len());
        let preamble = segments(&text[..before]);
        let example = segments(&text[inner_start..inner_end]);
        let query = segments(&text[after..]);
        if count(&example, &Segment::RetrievedDiff) != 1 || count(&example, &Segment::RetrievedMsg) != 1 {
            return err("the example block needs {{retrieved_diff}} and {{retrieved_msg}} exactly once");
        }
        if count(&example, &Segment::QueryDiff) != 0 || count(&preamble, &Segment::QueryDiff) != 0 {
            return err("{{query_diff}} must come after the example block");
        }
        if count(&query, &Segment::QueryDiff) != 1 {
            return err("{{query_diff}} must appear exactly once after the example block");
        }
        let outside = preamble.iter().chain(&query);
        if outside
            .clone()
            .any(|s| matches!(s, Segment::RetrievedDiff | Segment::RetrievedMsg))
        {
            return err("example slots may only appear inside the example block");
        }
        Ok(PromptTemplate {
            source: text.to_string(),
            preamble,
            example,
            query,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, AugmentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// SHA-256 of the template text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.source.as_bytes()))
    }

    fn render_raw(&self, query: &str, examples: &[(&str, &str)]) -> String {
        let mut out = String::new();
        let mut emit = |segs: &[Segment], diff: &str, msg: &str| {
            for s in segs {
                match s {
                    Segment::Text(t) => out.push_str(t),
                    Segment::QueryDiff => out.push_str(query),
                    Segment::RetrievedDiff => out.push_str(diff),
                    Segment::RetrievedMsg => out.push_str(msg),
                }
            }
        };
        emit(&self.preamble, "", "");
        for (diff, msg) in examples {
            emit(&self.example, diff, msg);
        }
        emit(&self.query, "", "");
        out
    }
}

/// A rendered prompt and the examples that survived the length budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub text: String,
    /// Indices into the caller's example list, in rendered order.
    pub used: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PromptBuilder {
    pub template: PromptTemplate,
    pub max_chars: usize,
    pub order: ExampleOrder,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder {
            template: PromptTemplate::default(),
            max_chars: DEFAULT_MAX_PROMPT_CHARS,
            order: ExampleOrder::default(),
        }
    }
}

impl PromptBuilder {
    pub fn new(template: PromptTemplate, max_chars: usize) -> Self {
        PromptBuilder {
            template,
            max_chars,
            order: ExampleOrder::default(),
        }
    }

    pub fn direct(&self, query_diff: &str) -> Result<String, AugmentError> {
        if query_diff.is_empty() {
            return Err(AugmentError::EmptyQuery);
        }
        Ok(self.template.render_raw(query_diff, &[]))
    }

    pub fn rag<T: Scalar>(&self, query_diff: &str, examples: &[ExamplePair<T>]) -> Result<Prompt, AugmentError> {
        if query_diff.is_empty() {
            return Err(AugmentError::EmptyQuery);
        }
        if examples.len() > MAX_EXAMPLES {
            return Err(AugmentError::TooManyExamples {
                got: examples.len(),
                max: MAX_EXAMPLES,
            });
        }
        // Ascending by score; among equal scores the later-ranked one first.
        let mut order: Vec<usize> = (0..examples.len()).rev().collect();
        order.sort_by(|&a, &b| {
            examples[a]
                .hybrid_score
                .partial_cmp(&examples[b].hybrid_score)
                .unwrap_or(Ordering::Equal)
        });
        // `order` is now least relevant first; evict from the front.
        let mut kept = order;
        loop {
            let rendered: Vec<usize> = match self.order {
                ExampleOrder::Ascending => kept.clone(),
                ExampleOrder::Descending => kept.iter().rev().copied().collect(),
            };
            let pairs: Vec<(&str, &str)> = rendered
                .iter()
                .map(|&i| (examples[i].diff.as_str(), examples[i].message.as_str()))
                .collect();
            let text = self.template.render_raw(query_diff, &pairs);
            if kept.is_empty() || text.chars().count() <= self.max_chars {
                if kept.is_empty() && text.chars().count() > self.max_chars {
                    log::warn!("prompt exceeds {} chars even without examples", self.max_chars);
                }
                return Ok(Prompt { text, used: rendered });
            }
            kept.remove(0);
        }
    }
}

/// Direct prompt with the built-in template.
pub fn build_direct_prompt(query_diff: &str) -> Result<String, AugmentError> {
    PromptBuilder::default().direct(query_diff)
}

/// Example-augmented prompt with the built-in template and default budget.
pub fn build_rag_prompt<T: Scalar>(query_diff: &str, examples: &[ExamplePair<T>]) -> Result<String, AugmentError> {
    PromptBuilder::default().rag(query_diff, examples).map(|p| p.text)
}
