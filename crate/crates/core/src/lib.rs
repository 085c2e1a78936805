//! Retrieval-augmented commit message generation.
//!
//! The crate covers the full pipeline: mining commit records from git
//! history and filtering them into a corpus, hybrid BM25 + dense retrieval
//! of similar diff/message pairs within a project, prompt construction,
//! model provider clients, and the evaluation metrics used to score
//! generated messages against developer-written references.
//!
//! Scoring code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod augment;
pub mod commit;
pub mod corpus;
pub mod diff;
pub mod harness;
pub mod jsonl;
pub mod metrics;
pub mod providers;
pub mod retriever;
pub mod scalar;
pub mod synthetic;
pub mod tokenizer;

pub use commit::{CommitRecord, TokenSequence};
pub use diff::{count_loc, diff_line_count, parse_diff, Language, ParsedDiff};
pub use scalar::Scalar;
pub use tokenizer::{base_tokenize, enhance, tokenize, Tokenizer};

pub type MetricReport = metrics::MetricReport<f64>;
pub type SampleScores = metrics::SampleScores<f64>;
pub type IdfTable = metrics::IdfTable<f64>;
