use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commitrag::augment::{PromptBuilder, PromptTemplate, DEFAULT_MAX_PROMPT_CHARS};
use commitrag::corpus::{
    apply_filters, compute_stats, ingest, preprocess_message, DiffLengthMode, FilterConfig, IngestOptions,
};
use commitrag::harness::{
    find_runs, render_report, run_experiment, run_k_sweep, sha256_hex, suggest, ExperimentConfig, ExperimentResult,
};
use commitrag::metrics::{evaluate_corpus, CiderScale, EvalOptions};
use commitrag::providers::{CachedEmbedder, Generator, ProviderSettings};
use commitrag::retriever::{retrieve, IndexManifest, Query, RetrievalIndex};
use commitrag::{jsonl, CommitRecord, MetricReport, Tokenizer};

#[derive(Parser)]
#[command(
    name = "commitrag",
    version,
    about = "Retrieval-augmented commit message generation and evaluation"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine commit records from a local git clone.
    Ingest(IngestArgs),
    /// Apply the corpus filters to a record file.
    Filter(FilterArgs),
    /// Token and change-size statistics of a record file.
    Stats(StatsArgs),
    /// Print enhanced-tokenizer output, one line per input line.
    Tokenize(TokenizeArgs),
    /// Score hypotheses against references (line-aligned files).
    Evaluate(EvaluateArgs),
    /// Build a retrieval index from a filtered corpus.
    Index(IndexArgs),
    /// Retrieve example pairs for a diff from an index.
    Retrieve(RetrieveArgs),
    /// Run an experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// Suggest a message for a diff from a repository's own history.
    Suggest(SuggestArgs),
    /// Render a comparison table from finished runs.
    Report(ReportArgs),
}

#[derive(Args)]
struct ProviderArgs {
    /// Provider settings file (JSON with `embed.endpoint`, `gen.model`, ... keys).
    #[arg(long)]
    provider_config: Option<PathBuf>,
    /// Embedding endpoint URL, or `mock` for the offline hashing embedder.
    #[arg(long)]
    embed_endpoint: Option<String>,
    /// Extra `key=value` provider settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ProviderArgs {
    fn settings(&self) -> Result<ProviderSettings> {
        let mut s = match &self.provider_config {
            Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
            None => ProviderSettings::default(),
        };
        if let Some(e) = &self.embed_endpoint {
            s.embed_endpoint = Some(e.clone());
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("expected KEY=VALUE, got {kv:?}"))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Path to the local clone.
    #[arg(long)]
    repo: PathBuf,
    #[arg(long, default_value = "HEAD")]
    branch: String,
    /// Earliest commit date (YYYY-MM-DD or RFC 3339).
    #[arg(long, default_value = "1970-01-01")]
    since: String,
    /// Overrides the `owner/name` derived from the origin remote.
    #[arg(long)]
    repo_name: Option<String>,
    /// Keep messages as written instead of first-line preprocessing.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-rule rejection report here as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Measure diff length as added + deleted lines instead of raw lines.
    #[arg(long)]
    changed_lines: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct TokenizeArgs {
    /// Drop tokens without letters or digits.
    #[arg(long)]
    drop_symbol_tokens: bool,
    /// Text to tokenize; stdin lines if omitted.
    #[arg(long)]
    text: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Percent,
    Canonical,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value = "percent")]
    cider_scale: Scale,
    #[arg(long)]
    drop_symbol_tokens: bool,
    /// Print per-sample scores as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    providers: ProviderArgs,
    /// Embedding cache file (read and updated).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query_diff: PathBuf,
    #[arg(long)]
    repo: String,
    #[arg(short, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    exclude_sha: Option<String>,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run once per k (comma separated), overriding the config's k.
    #[arg(long, value_delimiter = ',')]
    k_sweep: Option<Vec<usize>>,
}

#[derive(Args)]
struct SuggestArgs {
    /// Path to the local clone whose history is searched.
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    diff: PathBuf,
    #[arg(short, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "HEAD")]
    branch: String,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_PROMPT_CHARS)]
    max_prompt_chars: usize,
    /// Print the prompt sent to the generator.
    #[arg(long)]
    show_prompt: bool,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// A run directory or a directory of run directories.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_since(s: &str) -> Result<DateTime<Utc>> {
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Ok(d.with_timezone(&Utc));
    }
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").with_context(|| format!("invalid date {s:?}"))?;
    Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc())
}

fn load_records(path: &Path) -> Result<Vec<CommitRecord>> {
    Ok(jsonl::read(path)?)
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let mut opts = IngestOptions::new(&a.repo, &a.branch, parse_since(&a.since)?);
    opts.repo_name = a.repo_name;
    let mut records = Vec::new();
    for r in ingest(&opts)? {
        let mut r = r?;
        if !a.raw {
            r.message = preprocess_message(&r.message);
        }
        records.push(r);
    }
    jsonl::write(&a.out, &records)?;
    eprintln!("ingested {} commits into {}", records.len(), a.out.display());
    Ok(())
}

fn cmd_filter(a: FilterArgs) -> Result<()> {
    let records = load_records(&a.input)?;
    let mut cfg = FilterConfig::default();
    if a.changed_lines {
        cfg.diff_length_mode = DiffLengthMode::ChangedLines;
    }
    let (kept, report) = apply_filters(records, &cfg);
    jsonl::write(&a.out, &kept)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(p) => fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    if !report.reconciles() {
        bail!("filter report does not reconcile");
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let records = load_records(&a.input)?;
    let stats = compute_stats(&records, &Tokenizer::new())?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn cmd_tokenize(a: TokenizeArgs) -> Result<()> {
    let tok = if a.drop_symbol_tokens {
        Tokenizer::dropping_symbols()
    } else {
        Tokenizer::new()
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &a.text {
        Some(t) => writeln!(out, "{}", tok.tokenize(t))?,
        None => {
            for line in io::stdin().lock().lines() {
                writeln!(out, "{}", tok.tokenize(&line?))?;
            }
        }
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let hyps = read(&a.hyp)?;
    let refs = read(&a.reference)?;
    let hyps: Vec<&str> = hyps.lines().collect();
    let refs: Vec<&str> = refs.lines().collect();
    if hyps.len() != refs.len() {
        bail!("{} hypotheses but {} references", hyps.len(), refs.len());
    }
    let opts = EvalOptions {
        tokenizer: if a.drop_symbol_tokens {
            Tokenizer::dropping_symbols()
        } else {
            Tokenizer::new()
        },
        cider_scale: match a.cider_scale {
            Scale::Percent => CiderScale::Percent,
            Scale::Canonical => CiderScale::Canonical,
        },
        ..EvalOptions::default()
    };
    let pairs: Vec<(&str, &str)> = hyps.into_iter().zip(refs).collect();
    let report: MetricReport = evaluate_corpus(&pairs, &opts)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("samples  {}", report.per_sample.len());
        println!("BLEU     {:.2}", report.bleu);
        println!("ROUGE-L  {:.2}", report.rouge_l);
        println!("METEOR   {:.2}", report.meteor);
        println!("CIDEr    {:.2}", report.cider);
    }
    Ok(())
}

fn embedder_for(settings: &ProviderSettings, cache: Option<&Path>) -> Result<CachedEmbedder> {
    let embedder = settings.embedder(settings.limiter())?;
    if let Some(c) = cache {
        embedder.load(c)?;
    }
    Ok(embedder)
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let settings = a.providers.settings()?;
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let records = load_records(&a.input)?;
    let embedder = embedder_for(&settings, a.cache.as_deref())?;
    let index = RetrievalIndex::<f64>::build(&records, &embedder, a.workers)?;
    index.save(&a.out, Some(&sha256_hex(&bytes)))?;
    if let Some(c) = &a.cache {
        embedder.save(c)?;
    }
    eprintln!(
        "indexed {} documents in {} projects ({} embedding requests, {} network calls)",
        index.len(),
        index.partitions().count(),
        embedder.provider_calls(),
        embedder.network_calls()
    );
    Ok(())
}

fn cmd_retrieve(a: RetrieveArgs) -> Result<()> {
    let manifest = IndexManifest::read(&a.index)?;
    let mut settings = a.providers.settings()?;
    settings.embed_dimension.get_or_insert(manifest.dimension);
    let embedder = embedder_for(&settings, None)?;
    if embedder.model_id() != manifest.embed_model {
        bail!(
            "index was built with {}, but the configured embedder is {}",
            manifest.embed_model,
            embedder.model_id()
        );
    }
    let index = RetrievalIndex::<f64>::load(&a.index)?;
    let diff = read(&a.query_diff)?;
    let mut q = Query::new(&diff, a.k, &a.repo);
    q.exclude_sha = a.exclude_sha.as_deref();
    let r = retrieve(&q, &index, &embedder)?;
    println!("{}", serde_json::to_string_pretty(&r.pairs)?);
    if let Some(missing) = r.shortfall() {
        eprintln!("warning: {missing} of {} requested pairs unavailable", a.k);
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let config = ExperimentConfig::from_json(&read(&a.config)?)?;
    let ks = a.k_sweep.or_else(|| config.k_sweep.clone());
    let results = match ks {
        Some(ks) => run_k_sweep(&config, &ks)?,
        None => vec![run_experiment(&config)?],
    };
    for r in &results {
        let m = &r.manifest;
        eprintln!(
            "{}: {} rows ({} failed) BLEU {:.2} ROUGE-L {:.2} METEOR {:.2} CIDEr {:.2}",
            m.config.output_dir.display(),
            m.rows,
            m.failed,
            m.means.bleu,
            m.means.rouge_l,
            m.means.meteor,
            m.means.cider
        );
    }
    Ok(())
}

fn cmd_suggest(a: SuggestArgs) -> Result<()> {
    let settings = a.providers.settings()?;
    let diff = read(&a.diff)?;
    let opts = IngestOptions::new(&a.repo, &a.branch, DateTime::<Utc>::UNIX_EPOCH);
    let mut history = Vec::new();
    let mut repo_name = String::new();
    let stream = ingest(&opts)?;
    repo_name.push_str(stream.repo_name());
    for r in stream {
        let mut r = r?;
        r.message = preprocess_message(&r.message);
        history.push(r);
    }
    let embedder = embedder_for(&settings, None)?;
    let template = match &a.template {
        Some(p) => PromptTemplate::from_file(p)?,
        None => PromptTemplate::default(),
    };
    let builder = PromptBuilder::new(template, a.max_prompt_chars);
    let generator: Option<Box<dyn Generator>> = match settings.gen_endpoint {
        Some(_) => Some(Box::new(settings.http_generator(settings.limiter())?)),
        None => None,
    };
    let s = suggest(
        &history,
        &repo_name,
        &diff,
        a.k,
        &embedder,
        generator.as_deref(),
        &builder,
        4,
    )?;
    if a.show_prompt {
        if let Some(p) = &s.prompt {
            eprintln!("{p}");
        }
    }
    for ex in &s.examples {
        eprintln!(
            "example {} ({:.3}): {}",
            &ex.handle.sha[..12.min(ex.handle.sha.len())],
            ex.hybrid_score,
            ex.message
        );
    }
    println!("{}", s.message);
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let dirs = find_runs(&a.input)?;
    if dirs.is_empty() {
        bail!("no runs found under {}", a.input.display());
    }
    let results = dirs
        .iter()
        .map(|d| ExperimentResult::load(d).with_context(|| format!("loading {}", d.display())))
        .collect::<Result<Vec<_>>>()?;
    let md = render_report(&results)?;
    match &a.out {
        Some(p) => fs::write(p, md)?,
        None => print!("{md}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Tokenize(a) => cmd_tokenize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Index(a) => cmd_index(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Suggest(a) => cmd_suggest(a),
        Command::Report(a) => cmd_report(a),
    }
}
