//! Experiment configuration (`experiment --config exp.json`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::augment::{ExampleOrder, DEFAULT_MAX_PROMPT_CHARS, MAX_EXAMPLES};
use crate::harness::HarnessError;
use crate::providers::ProviderSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Instruction and query diff only.
    Direct,
    /// Query diff plus retrieved example pairs.
    Rag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// The configured generation endpoint.
    Provider,
    /// Echoes the top retrieved message through the prompt pipeline.
    EchoMock,
    /// Copies the top retrieved message without building a prompt.
    RetrievalCopy,
    /// Returns a fixed string.
    Constant(String),
}

impl GeneratorKind {
    pub fn needs_retrieval(&self) -> bool {
        matches!(self, GeneratorKind::EchoMock | GeneratorKind::RetrievalCopy)
    }
}

fn default_workers() -> usize {
    4
}

fn default_max_chars() -> usize {
    DEFAULT_MAX_PROMPT_CHARS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Filtered corpus in JSON Lines.
    pub corpus: PathBuf,
    /// Prebuilt index directory; built in memory from the corpus if absent.
    #[serde(default)]
    pub index: Option<PathBuf>,
    /// Sampled commits; the whole corpus if absent.
    #[serde(default)]
    pub subset_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub method: Method,
    #[serde(default)]
    pub k: Option<usize>,
    /// Runs one experiment per k, each in `output_dir/k<k>`.
    #[serde(default)]
    pub k_sweep: Option<Vec<usize>>,
    pub generator: GeneratorKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub template: Option<PathBuf>,
    #[serde(default = "default_max_chars")]
    pub max_prompt_chars: usize,
    #[serde(default)]
    pub example_order: ExampleOrder,
    #[serde(default)]
    pub providers: ProviderSettings,
    /// Embedding cache file, loaded before and saved after each run.
    #[serde(default)]
    pub embed_cache: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(
        corpus: impl Into<PathBuf>,
        method: Method,
        generator: GeneratorKind,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        ExperimentConfig {
            corpus: corpus.into(),
            index: None,
            subset_size: None,
            seed: 0,
            method,
            k: (method == Method::Rag).then_some(1),
            k_sweep: None,
            generator,
            output_dir: output_dir.into(),
            template: None,
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
            example_order: ExampleOrder::default(),
            providers: ProviderSettings::default(),
            embed_cache: None,
            workers: default_workers(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        let check_k = |k: usize| (1..=MAX_EXAMPLES).contains(&k);
        match self.method {
            Method::Direct => {
                if self.k.is_some() || self.k_sweep.is_some() {
                    return err("k is only valid with method \"rag\"".into());
                }
                if self.generator.needs_retrieval() {
                    return err(format!("generator {:?} needs method \"rag\"", self.generator));
                }
            }
            Method::Rag => match (&self.k, &self.k_sweep) {
                (None, None) => return err("method \"rag\" needs k or k_sweep".into()),
                (_, Some(ks)) if ks.is_empty() || !ks.iter().all(|&k| check_k(k)) => {
                    return err(format!("k_sweep values must be in 1..={MAX_EXAMPLES}"))
                }
                (Some(k), _) if !check_k(*k) => return err(format!("k must be in 1..={MAX_EXAMPLES}, got {k}")),
                _ => {}
            },
        }
        if self.workers == 0 {
            return err("workers must be at least 1".into());
        }
        if self.generator == GeneratorKind::Provider {
            self.providers.generation_config()?.validate_for_experiment()?;
        }
        Ok(())
    }
}
