//! Quality filters applied to mined commits, with per-rule accounting.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commit::CommitRecord;
use crate::diff::{diff_line_count, Language};

/// The five filters, evaluated in this order; a rejection is attributed to
/// the first rule that fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Message word count outside the allowed range.
    MessageLength,
    /// Diff longer than the line limit.
    DiffLength,
    /// No file in a mainstream language.
    FileType,
    /// Bot author.
    Bot,
    /// Merge or revert keyword in the message.
    MergeRevert,
}

impl Rule {
    pub const ALL: [Rule; 5] = [
        Rule::MessageLength,
        Rule::DiffLength,
        Rule::FileType,
        Rule::Bot,
        Rule::MergeRevert,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        ["R1", "R2", "R3", "R4", "R5"][self.index()]
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// How the diff length limit counts lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffLengthMode {
    /// Every line of the raw payload, headers and context included.
    #[default]
    RawLines,
    /// Added plus deleted lines only.
    ChangedLines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub max_diff_lines: usize,
    pub diff_length_mode: DiffLengthMode,
    pub source_languages: Vec<Language>,
    pub bot_marker: String,
    pub keywords: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_words: 5,
            max_words: 50,
            max_diff_lines: 300,
            diff_length_mode: DiffLengthMode::RawLines,
            source_languages: Language::MAINSTREAM.to_vec(),
            bot_marker: "[bot]".into(),
            keywords: vec!["merge".into(), "revert".into()],
        }
    }
}

impl FilterConfig {
    /// The first rule `record` violates, if any.
    pub fn check(&self, record: &CommitRecord) -> Option<Rule> {
        let words = record.message.split_whitespace().count();
        if words < self.min_words || words > self.max_words {
            return Some(Rule::MessageLength);
        }
        let diff_lines = match self.diff_length_mode {
            DiffLengthMode::RawLines => diff_line_count(&record.diff),
            DiffLengthMode::ChangedLines => record.loc,
        };
        if diff_lines > self.max_diff_lines {
            return Some(Rule::DiffLength);
        }
        let has_source = record
            .files
            .iter()
            .any(|f| self.source_languages.contains(&Language::from_path(f)));
        if !has_source {
            return Some(Rule::FileType);
        }
        if record
            .author_name
            .to_lowercase()
            .contains(&self.bot_marker.to_lowercase())
        {
            return Some(Rule::Bot);
        }
        let lowered = record.message.to_lowercase();
        let hit = lowered
            .split(|c: char| !c.is_alphanumeric())
            .any(|tok| self.keywords.iter().any(|k| k == tok));
        if hit {
            return Some(Rule::MergeRevert);
        }
        None
    }
}

/// Input, per-rule rejections and retained counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub rejected_r1: usize,
    pub rejected_r2: usize,
    pub rejected_r3: usize,
    pub rejected_r4: usize,
    pub rejected_r5: usize,
    pub retained: usize,
}

impl FilterReport {
    pub fn rejected(&self, rule: Rule) -> usize {
        match rule {
            Rule::MessageLength => self.rejected_r1,
            Rule::DiffLength => self.rejected_r2,
            Rule::FileType => self.rejected_r3,
            Rule::Bot => self.rejected_r4,
            Rule::MergeRevert => self.rejected_r5,
        }
    }

    fn rejected_mut(&mut self, rule: Rule) -> &mut usize {
        match rule {
            Rule::MessageLength => &mut self.rejected_r1,
            Rule::DiffLength => &mut self.rejected_r2,
            Rule::FileType => &mut self.rejected_r3,
            Rule::Bot => &mut self.rejected_r4,
            Rule::MergeRevert => &mut self.rejected_r5,
        }
    }

    pub fn total_rejected(&self) -> usize {
        Rule::ALL.iter().map(|r| self.rejected(*r)).sum()
    }

    /// `retained + rejections == input`.
    pub fn reconciles(&self) -> bool {
        self.retained + self.total_rejected() == self.input
    }

    pub fn record(&mut self, outcome: Option<Rule>) {
        self.input += 1;
        match outcome {
            Some(rule) => *self.rejected_mut(rule) += 1,
            None => self.retained += 1,
        }
    }

    /// Counter-wise sum; associative and commutative.
    pub fn merge(mut self, other: FilterReport) -> FilterReport {
        self.input += other.input;
        for rule in Rule::ALL {
            *self.rejected_mut(rule) += other.rejected(rule);
        }
        self.retained += other.retained;
        self
    }
}

/// Applies the rules in order and returns the retained records.
pub fn apply_filters<I>(records: I, config: &FilterConfig) -> (Vec<CommitRecord>, FilterReport)
where
    I: IntoIterator<Item = CommitRecord>,
{
    let mut report = FilterReport::default();
    let mut kept = Vec::new();
    for record in records {
        let outcome = config.check(&record);
        report.record(outcome);
        if outcome.is_none() {
            kept.push(record);
        }
    }
    (kept, report)
}

/// Parallel variant; retained records keep their input order.
pub fn apply_filters_par(records: Vec<CommitRecord>, config: &FilterConfig) -> (Vec<CommitRecord>, FilterReport) {
    let outcomes: Vec<Option<Rule>> = records.par_iter().map(|r| config.check(r)).collect();
    let report = outcomes
        .par_iter()
        .fold(FilterReport::default, |mut acc, o| {
            acc.record(*o);
            acc
        })
        .reduce(FilterReport::default, FilterReport::merge);
    let kept = records
        .into_iter()
        .zip(outcomes)
        .filter_map(|(r, o)| o.is_none().then_some(r))
        .collect();
    (kept, report)
}
