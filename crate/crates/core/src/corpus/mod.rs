//! Corpus construction: mining, message preprocessing, filtering and
//! statistics.

mod filter;
mod ingest;
mod preprocess;
mod stats;

pub use filter::{apply_filters, apply_filters_par, DiffLengthMode, FilterConfig, FilterReport, Rule};
pub use ingest::{detect_repo_name, ingest, ingest_repo, CommitStream, IngestOptions};
pub use preprocess::preprocess_message;
pub use stats::{compute_stats, CorpusStats, LengthStats};

use std::path::PathBuf;

use crate::commit::RecordError;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("not a git repository: {0}")]
    RepoNotFound(PathBuf),
    #[error("branch not found: {0}")]
    BranchNotFound(String),
    #[error("git: {0}")]
    Git(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
