//! The per-commit retrieve, augment, generate and evaluate loop.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{PromptBuilder, PromptTemplate};
use crate::commit::{CommitRecord, TokenSequence};
use crate::diff::Language;
use crate::harness::config::{ExperimentConfig, GeneratorKind, Method};
use crate::harness::sample::sample_subset;
use crate::harness::HarnessError;
use crate::jsonl;
use crate::metrics::{build_idf, score_pair, EvalOptions, MetricReport, SampleScores};
use crate::providers::{generate, CachedEmbedder, ConstantGenerator, EchoGenerator, GenerationRequest, Generator};
use crate::retriever::{retrieve, ExamplePair, Query, RetrievalError, RetrievalIndex};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedRef {
    pub sha: String,
    pub repo_full_name: String,
    pub hybrid_score: f64,
}

/// One sampled commit's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sha: String,
    pub repo_full_name: String,
    pub language: Language,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub reference: String,
    pub generated: Option<String>,
    pub scores: Option<SampleScores<f64>>,
    pub retrieved: Vec<RetrievedRef>,
    /// Examples that made it into the prompt after the length budget.
    pub prompt_examples: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCalls {
    /// Embedding requests that missed the cache.
    pub embedding_requests: usize,
    pub embedding_network: usize,
    pub generation_network: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub cider: f64,
}

impl From<&MetricReport<f64>> for Means {
    fn from(r: &MetricReport<f64>) -> Self {
        Means {
            bleu: r.bleu,
            rouge_l: r.rouge_l,
            meteor: r.meteor,
            cider: r.cider,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus: PathBuf,
    pub corpus_sha256: String,
    /// SHA-256 over the sorted sampled shas.
    pub subset_sha256: String,
    pub seed: u64,
    pub subset_size: usize,
    pub method: Method,
    pub k: Option<usize>,
    pub generator_id: String,
    pub embed_model: Option<String>,
    pub template_sha256: String,
    pub provider_calls: ProviderCalls,
    pub rows: usize,
    pub failed: usize,
    pub means: Means,
    pub elapsed_ms: u64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub manifest: RunManifest,
    pub rows: Vec<ResultRow>,
    /// Means over the rows with status `ok`.
    pub report: MetricReport<f64>,
}

impl ExperimentResult {
    pub fn from_rows(manifest: RunManifest, rows: Vec<ResultRow>) -> Self {
        let report = MetricReport::from_samples(rows.iter().filter_map(|r| r.scores).collect());
        ExperimentResult { manifest, rows, report }
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", dir.join(MANIFEST_FILE).display())))?;
        let rows = jsonl::read(&dir.join(RESULTS_FILE))?;
        Ok(Self::from_rows(manifest, rows))
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        jsonl::write(&dir.join(RESULTS_FILE), &self.rows)?;
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Top-1 retrieved message, verbatim: the retrieval-only baseline.
pub fn retrieval_copy_generate(
    query_diff: &str,
    repo: &str,
    exclude_sha: Option<&str>,
    index: &RetrievalIndex<f64>,
    embedder: &CachedEmbedder,
) -> Result<String, RetrievalError> {
    let mut q = Query::new(query_diff, 1, repo);
    q.exclude_sha = exclude_sha;
    let r = retrieve(&q, index, embedder)?;
    Ok(r.pairs[0].message.clone())
}

enum Backend {
    RetrievalCopy,
    Model(Arc<dyn Generator>),
}

/// Loaded corpus, sampled subset, providers and index, reusable across
/// runs that differ only in `k` (a k-sweep).
pub struct Experiment {
    config: ExperimentConfig,
    records: Vec<CommitRecord>,
    corpus_sha256: String,
    subset: Vec<usize>,
    subset_sha256: String,
    embedder: CachedEmbedder,
    index: Option<RetrievalIndex<f64>>,
    builder: PromptBuilder,
    backend: Backend,
    pool: rayon::ThreadPool,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let bytes = fs::read(&config.corpus)?;
        let corpus_sha256 = sha256_hex(&bytes);
        let records: Vec<CommitRecord> = jsonl::read(&config.corpus)?;
        if records.is_empty() {
            return Err(HarnessError::EmptyCorpus);
        }
        let n = config.subset_size.unwrap_or(records.len());
        let subset = sample_subset(&records, n, config.seed)?;
        let mut shas: Vec<&str> = subset.iter().map(|&i| records[i].sha.as_str()).collect();
        shas.sort_unstable();
        let subset_sha256 = sha256_hex(shas.join("\n").as_bytes());

        let limiter = config.providers.limiter();
        let embedder = config.providers.embedder(limiter.clone())?;
        if let Some(cache) = &config.embed_cache {
            let n = embedder.load(cache)?;
            log::info!("loaded {n} cached embeddings from {}", cache.display());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;

        let index = match (config.method, &config.index) {
            (Method::Direct, _) => None,
            (Method::Rag, Some(dir)) => {
                let manifest = crate::retriever::IndexManifest::read(dir)?;
                if manifest.corpus_sha256.as_deref().is_some_and(|h| h != corpus_sha256) {
                    return Err(HarnessError::Config(format!(
                        "index {} was built from a different corpus",
                        dir.display()
                    )));
                }
                if manifest.embed_model != embedder.model_id() {
                    return Err(HarnessError::Config(format!(
                        "index uses embedding model {}, configured model is {}",
                        manifest.embed_model,
                        embedder.model_id()
                    )));
                }
                Some(RetrievalIndex::load(dir)?)
            }
            (Method::Rag, None) => Some(RetrievalIndex::build(&records, &embedder, config.workers)?),
        };

        let template = match &config.template {
            Some(path) => PromptTemplate::from_file(path)?,
            None => PromptTemplate::default(),
        };
        let mut builder = PromptBuilder::new(template, config.max_prompt_chars);
        builder.order = config.example_order;

        let backend = match &config.generator {
            GeneratorKind::RetrievalCopy => Backend::RetrievalCopy,
            GeneratorKind::EchoMock => Backend::Model(Arc::new(EchoGenerator)),
            GeneratorKind::Constant(s) => Backend::Model(Arc::new(ConstantGenerator(s.clone()))),
            GeneratorKind::Provider => Backend::Model(Arc::new(config.providers.http_generator(limiter)?)),
        };
        Ok(Experiment {
            config: config.clone(),
            records,
            corpus_sha256,
            subset,
            subset_sha256,
            embedder,
            index,
            builder,
            backend,
            pool,
        })
    }

    /// Replaces the configured generator.
    pub fn with_generator(mut self, generator: Arc<dyn Generator>) -> Self {
        self.backend = Backend::Model(generator);
        self
    }

    pub fn subset(&self) -> impl Iterator<Item = &CommitRecord> {
        self.subset.iter().map(|&i| &self.records[i])
    }

    pub fn index(&self) -> Option<&RetrievalIndex<f64>> {
        self.index.as_ref()
    }

    pub fn embedder(&self) -> &CachedEmbedder {
        &self.embedder
    }

    fn generator_id(&self) -> String {
        match &self.backend {
            Backend::RetrievalCopy => "retrieval-copy".into(),
            Backend::Model(g) => g.id(),
        }
    }

    fn generation_calls(&self) -> usize {
        match &self.backend {
            Backend::RetrievalCopy => 0,
            Backend::Model(g) => g.network_calls(),
        }
    }

    fn process(&self, record: &CommitRecord, k: Option<usize>) -> ResultRow {
        let mut row = ResultRow {
            sha: record.sha.clone(),
            repo_full_name: record.repo_full_name.clone(),
            language: record.language(),
            status: RowStatus::Ok,
            error: None,
            reference: record.message.clone(),
            generated: None,
            scores: None,
            retrieved: Vec::new(),
            prompt_examples: 0,
        };
        match self.generate_one(record, k, &mut row) {
            Ok(text) => row.generated = Some(text),
            Err(e) => {
                log::warn!("commit {} failed: {e}", record.sha);
                row.status = RowStatus::Failed;
                row.error = Some(e.to_string());
            }
        }
        row
    }

    fn generate_one(
        &self,
        record: &CommitRecord,
        k: Option<usize>,
        row: &mut ResultRow,
    ) -> Result<String, HarnessError> {
        let examples: Vec<ExamplePair<f64>> = match (&self.index, k) {
            (Some(index), Some(k)) => {
                let q = Query::new(&record.diff, k, &record.repo_full_name).excluding(&record.sha);
                retrieve(&q, index, &self.embedder)?.pairs
            }
            _ => Vec::new(),
        };
        row.retrieved = examples
            .iter()
            .map(|p| RetrievedRef {
                sha: p.handle.sha.clone(),
                repo_full_name: p.handle.repo_full_name.clone(),
                hybrid_score: p.hybrid_score,
            })
            .collect();
        match &self.backend {
            Backend::RetrievalCopy => {
                let top = examples
                    .first()
                    .ok_or_else(|| HarnessError::Config("retrieval-copy needs k >= 1".into()))?;
                row.prompt_examples = 1;
                Ok(top.message.clone())
            }
            Backend::Model(generator) => {
                let (prompt, used) = if self.index.is_some() && k.is_some() {
                    let p = self.builder.rag(&record.diff, &examples)?;
                    (p.text, p.used)
                } else {
                    (self.builder.direct(&record.diff)?, Vec::new())
                };
                row.prompt_examples = used.len();
                // Most relevant first among the examples that survived the budget.
                let mut kept = used;
                kept.sort_unstable();
                let request = GenerationRequest {
                    prompt,
                    example_messages: kept.iter().map(|&i| examples[i].message.clone()).collect(),
                };
                Ok(generate(generator.as_ref(), &request)?)
            }
        }
    }

    /// Runs every sampled commit and writes `results.jsonl` and
    /// `manifest.json` to `output_dir`.
    pub fn run(&self, k: Option<usize>, output_dir: &Path) -> Result<ExperimentResult, HarnessError> {
        let started = Instant::now();
        let embed_requests = self.embedder.provider_calls();
        let embed_network = self.embedder.network_calls();
        let gen_network = self.generation_calls();

        let subset: Vec<&CommitRecord> = self.subset().collect();
        let mut rows: Vec<ResultRow> = self
            .pool
            .install(|| subset.par_iter().map(|r| self.process(r, k)).collect());

        let opts = EvalOptions::default();
        let refs: Vec<TokenSequence> = rows.iter().map(|r| opts.tokenizer.tokenize(&r.reference)).collect();
        let idf = build_idf::<f64>(&refs, opts.max_n)?;
        for (row, reference) in rows.iter_mut().zip(&refs) {
            if let Some(text) = &row.generated {
                let hyp = opts.tokenizer.tokenize(text);
                row.scores = Some(score_pair(&hyp, reference, &idf, &opts));
            }
        }
        rows.sort_by(|a, b| (&a.sha, &a.repo_full_name).cmp(&(&b.sha, &b.repo_full_name)));

        if let Some(cache) = &self.config.embed_cache {
            self.embedder.save(cache)?;
        }
        let mut config = self.config.clone();
        config.k = k;
        config.output_dir = output_dir.to_path_buf();
        let failed = rows.iter().filter(|r| r.status == RowStatus::Failed).count();
        let mut result = ExperimentResult::from_rows(
            RunManifest {
                corpus: self.config.corpus.clone(),
                corpus_sha256: self.corpus_sha256.clone(),
                subset_sha256: self.subset_sha256.clone(),
                seed: self.config.seed,
                subset_size: self.subset.len(),
                method: self.config.method,
                k,
                generator_id: self.generator_id(),
                embed_model: self.index.as_ref().map(|i| i.embed_model().to_string()),
                template_sha256: self.builder.template.hash(),
                provider_calls: ProviderCalls {
                    embedding_requests: self.embedder.provider_calls() - embed_requests,
                    embedding_network: self.embedder.network_calls() - embed_network,
                    generation_network: self.generation_calls() - gen_network,
                },
                rows: rows.len(),
                failed,
                means: Means {
                    bleu: 0.0,
                    rouge_l: 0.0,
                    meteor: 0.0,
                    cider: 0.0,
                },
                elapsed_ms: 0,
                config,
            },
            rows,
        );
        result.manifest.means = Means::from(&result.report);
        result.manifest.elapsed_ms = started.elapsed().as_millis() as u64;
        result.save(output_dir)?;
        Ok(result)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    Experiment::prepare(config)?.run(config.k, &config.output_dir)
}

/// One run per `k`, written to `output_dir/k<k>`.
pub fn run_k_sweep(config: &ExperimentConfig, ks: &[usize]) -> Result<Vec<ExperimentResult>, HarnessError> {
    let mut sweep = config.clone();
    sweep.method = Method::Rag;
    sweep.k_sweep = Some(ks.to_vec());
    let exp = Experiment::prepare(&sweep)?;
    ks.iter()
        .map(|&k| exp.run(Some(k), &config.output_dir.join(format!("k{k}"))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Suggestion {
    pub message: String,
    pub examples: Vec<ExamplePair<f64>>,
    pub prompt: Option<String>,
}

/// One-shot message suggestion for `diff` against a project's history.
/// Without a generator the top retrieved message is returned.
#[allow(clippy::too_many_arguments)]
pub fn suggest(
    history: &[CommitRecord],
    repo: &str,
    diff: &str,
    k: usize,
    embedder: &CachedEmbedder,
    generator: Option<&dyn Generator>,
    builder: &PromptBuilder,
    workers: usize,
) -> Result<Suggestion, HarnessError> {
    let scoped: Vec<CommitRecord> = history.iter().filter(|r| r.repo_full_name == repo).cloned().collect();
    let index = RetrievalIndex::<f64>::build(&scoped, embedder, workers)?;
    let examples = retrieve(&Query::new(diff, k, repo), &index, embedder)?.pairs;
    match generator {
        None => Ok(Suggestion {
            message: examples[0].message.clone(),
            examples,
            prompt: None,
        }),
        Some(g) => {
            let prompt = builder.rag(diff, &examples)?;
            let mut kept = prompt.used.clone();
            kept.sort_unstable();
            let request = GenerationRequest {
                prompt: prompt.text.clone(),
                example_messages: kept.iter().map(|&i| examples[i].message.clone()).collect(),
            };
            Ok(Suggestion {
                message: generate(g, &request)?,
                examples,
                prompt: Some(prompt.text),
            })
        }
    }
}

/// Paths under `dir` (itself included) that hold a run manifest, sorted.
pub fn find_runs(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    if dir.join(MANIFEST_FILE).is_file() {
        out.push(dir.to_path_buf());
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        out.extend(find_runs(&sub)?);
    }
    Ok(out)
}
