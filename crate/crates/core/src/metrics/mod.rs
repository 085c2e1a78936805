//! Sentence-level evaluation metrics: Google-BLEU, ROUGE-L, METEOR and
//! CIDEr, all computed over enhanced-tokenizer output.
//!
//! The per-metric functions return raw values (`[0, 1]` for GLEU, ROUGE-L
//! and METEOR; CIDEr is already on its output scale). [`MetricReport`]
//! stores everything on the 0–100 reporting scale.

mod cider;
mod gleu;
mod meteor;
pub(crate) mod ngram;
mod rouge;

pub use cider::{build_idf, cider, cider_scaled, CiderScale, IdfTable};
pub use gleu::gleu;
pub use meteor::{align, meteor, meteor_with, score_alignment, Alignment, MeteorParams};
pub use rouge::{lcs_len, rouge_l};

use serde::{Deserialize, Serialize};

use crate::commit::TokenSequence;
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

pub const DEFAULT_MAX_N: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("evaluation needs at least one sample")]
    EmptyCorpus,
}

/// Scores of one (hypothesis, reference) pair on the 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SampleScores<T> {
    pub bleu: T,
    pub rouge_l: T,
    pub meteor: T,
    pub cider: T,
}

/// Per-sample scores and their arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetricReport<T> {
    pub bleu: T,
    pub rouge_l: T,
    pub meteor: T,
    pub cider: T,
    pub per_sample: Vec<SampleScores<T>>,
}

impl<T: Scalar> MetricReport<T> {
    /// Means are zero for an empty sample list.
    pub fn from_samples(per_sample: Vec<SampleScores<T>>) -> Self {
        let n = T::from_count(per_sample.len().max(1));
        let mean = |f: fn(&SampleScores<T>) -> T| per_sample.iter().map(f).sum::<T>() / n;
        MetricReport {
            bleu: mean(|s| s.bleu),
            rouge_l: mean(|s| s.rouge_l),
            meteor: mean(|s| s.meteor),
            cider: mean(|s| s.cider),
            per_sample,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub tokenizer: Tokenizer,
    pub max_n: usize,
    pub cider_scale: CiderScale,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tokenizer: Tokenizer::default(),
            max_n: DEFAULT_MAX_N,
            cider_scale: CiderScale::Percent,
        }
    }
}

/// All four scores for already-tokenized text, given a shared IDF table.
pub fn score_pair<T: Scalar>(
    hyp: &TokenSequence,
    reference: &TokenSequence,
    idf: &IdfTable<T>,
    opts: &EvalOptions,
) -> SampleScores<T> {
    let hundred = T::lit(100.0);
    SampleScores {
        bleu: hundred * gleu::<T>(hyp, reference, opts.max_n),
        rouge_l: hundred * rouge_l::<T>(hyp, reference),
        meteor: hundred * meteor::<T>(hyp, reference),
        cider: cider_scaled(hyp, reference, idf, opts.max_n, opts.cider_scale),
    }
}

/// Tokenizes every pair, builds the IDF table from the references and
/// scores each sample.
pub fn evaluate_corpus<T: Scalar, H: AsRef<str>, R: AsRef<str>>(
    pairs: &[(H, R)],
    opts: &EvalOptions,
) -> Result<MetricReport<T>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let hyps: Vec<TokenSequence> = pairs.iter().map(|(h, _)| opts.tokenizer.tokenize(h.as_ref())).collect();
    let refs: Vec<TokenSequence> = pairs.iter().map(|(_, r)| opts.tokenizer.tokenize(r.as_ref())).collect();
    let idf = build_idf::<T>(&refs, opts.max_n)?;
    let per_sample = hyps
        .iter()
        .zip(&refs)
        .map(|(h, r)| score_pair(h, r, &idf, opts))
        .collect();
    Ok(MetricReport::from_samples(per_sample))
}
