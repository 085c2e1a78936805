//! Experiment runner: subset sampling, the per-commit pipeline, result
//! persistence and report rendering.

mod config;
mod report;
mod run;
mod sample;

pub use config::{ExperimentConfig, GeneratorKind, Method};
pub use report::{format_delta, relative_delta, render_report};
pub use run::{
    find_runs, retrieval_copy_generate, run_experiment, run_k_sweep, sha256_hex, suggest, Experiment, ExperimentResult,
    Means, ProviderCalls, ResultRow, RetrievedRef, RowStatus, RunManifest, Suggestion, MANIFEST_FILE, RESULTS_FILE,
};
pub use sample::sample_subset;

use crate::augment::AugmentError;
use crate::jsonl::JsonlError;
use crate::metrics::MetricsError;
use crate::providers::ProviderError;
use crate::retriever::RetrievalError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("corpus has {available} records, {requested} requested")]
    CorpusTooSmall { requested: usize, available: usize },
    #[error("results do not share a subset: {0}")]
    ManifestMismatch(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
