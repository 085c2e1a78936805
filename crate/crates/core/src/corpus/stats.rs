use serde::{Deserialize, Serialize};

use crate::commit::CommitRecord;
use crate::corpus::CorpusError;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub max: usize,
    pub median: usize,
}

impl LengthStats {
    /// Median is the lower-middle element for even counts.
    fn of(mut values: Vec<usize>) -> LengthStats {
        values.sort_unstable();
        let n = values.len();
        let sum: usize = values.iter().sum();
        LengthStats {
            mean: sum as f64 / n as f64,
            max: values[n - 1],
            median: values[(n - 1) / 2],
        }
    }
}

/// Token lengths and change sizes over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub diff_tokens: LengthStats,
    pub message_tokens: LengthStats,
    pub median_files: usize,
    pub median_changed_lines: usize,
}

pub fn compute_stats(records: &[CommitRecord], tokenizer: &Tokenizer) -> Result<CorpusStats, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let diff_lens = records.iter().map(|r| tokenizer.tokenize(&r.diff).len()).collect();
    let msg_lens = records.iter().map(|r| tokenizer.tokenize(&r.message).len()).collect();
    let files = LengthStats::of(records.iter().map(|r| r.files.len()).collect());
    let lines = LengthStats::of(records.iter().map(|r| r.loc).collect());
    Ok(CorpusStats {
        records: records.len(),
        diff_tokens: LengthStats::of(diff_lens),
        message_tokens: LengthStats::of(msg_lens),
        median_files: files.median,
        median_changed_lines: lines.median,
    })
}
