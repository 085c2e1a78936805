//! In-memory retrieval index: one lexical and one dense store per project.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commit::CommitRecord;
use crate::corpus::preprocess_message;
use crate::providers::CachedEmbedder;
use crate::retriever::bm25::{idf, term_weight, Bm25Params};
use crate::retriever::RetrievalError;
use crate::scalar::Scalar;
use crate::tokenizer::tokenize;

/// Identifies an indexed commit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DocHandle {
    pub sha: String,
    pub repo_full_name: String,
}

/// Tokens and stored vector of one record, before insertion.
type Prepared<T> = (Vec<String>, Vec<T>);

impl DocHandle {
    pub fn new(sha: impl Into<String>, repo: impl Into<String>) -> Self {
        DocHandle {
            sha: sha.into(),
            repo_full_name: repo.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub sha: String,
    pub date: DateTime<Utc>,
    pub diff: String,
    /// Preprocessed single-line message.
    pub message: String,
    /// Token count of the diff.
    pub len: usize,
}

/// Documents of one project with their term statistics and vectors.
#[derive(Debug, Clone)]
pub struct Partition<T> {
    pub(crate) repo: String,
    pub(crate) docs: Vec<Document>,
    pub(crate) by_sha: HashMap<String, usize>,
    pub(crate) terms: HashMap<String, usize>,
    pub(crate) term_names: Vec<String>,
    /// Per term, `(doc, tf)` sorted by doc.
    pub(crate) postings: Vec<Vec<(u32, u32)>>,
    pub(crate) total_len: usize,
    pub(crate) dimension: usize,
    /// Unit vectors rounded to f32, exactly as persisted.
    pub(crate) rows: Vec<f32>,
    pub(crate) vectors: Vec<T>,
}

impl<T: Scalar> Partition<T> {
    fn new(repo: String, dimension: usize) -> Self {
        Partition {
            repo,
            docs: Vec::new(),
            by_sha: HashMap::new(),
            terms: HashMap::new(),
            term_names: Vec::new(),
            postings: Vec::new(),
            total_len: 0,
            dimension,
            rows: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn repo(&self) -> &str {
        &self.repo
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn position(&self, sha: &str) -> Option<usize> {
        self.by_sha.get(sha).copied()
    }

    pub fn vector(&self, doc: usize) -> &[T] {
        &self.vectors[doc * self.dimension..(doc + 1) * self.dimension]
    }

    pub fn avgdl(&self) -> T {
        T::from_count(self.total_len) / T::from_count(self.docs.len().max(1))
    }

    pub fn df(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, |&t| self.postings[t].len())
    }

    pub fn tf(&self, term: &str, doc: usize) -> usize {
        let Some(&t) = self.terms.get(term) else {
            return 0;
        };
        let list = &self.postings[t];
        list.binary_search_by_key(&(doc as u32), |p| p.0)
            .map_or(0, |i| list[i].1 as usize)
    }

    /// Query tokens that occur in this partition, with their multiplicity.
    fn query_terms(&self, query: &[String]) -> Vec<(usize, usize)> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for tok in query {
            if let Some(&t) = self.terms.get(tok) {
                *counts.entry(t).or_default() += 1;
            }
        }
        counts.into_iter().collect()
    }

    pub fn bm25(&self, query: &[String], doc: usize, params: &Bm25Params<T>) -> T {
        let n = self.docs.len();
        let avgdl = self.avgdl();
        let len = self.docs[doc].len;
        let mut score = T::zero();
        for (t, count) in self.query_terms(query) {
            let list = &self.postings[t];
            if let Ok(i) = list.binary_search_by_key(&(doc as u32), |p| p.0) {
                let w = term_weight(idf(n, list.len()), list[i].1 as usize, len, avgdl, params);
                score = score + T::from_count(count) * w;
            }
        }
        score
    }

    /// BM25 of every document at once, via the postings lists.
    pub fn bm25_all(&self, query: &[String], params: &Bm25Params<T>) -> Vec<T> {
        let n = self.docs.len();
        let avgdl = self.avgdl();
        let mut scores = vec![T::zero(); n];
        for (t, count) in self.query_terms(query) {
            let list = &self.postings[t];
            let weight = idf::<T>(n, list.len());
            let c = T::from_count(count);
            for &(doc, tf) in list {
                let d = doc as usize;
                let w = term_weight(weight, tf as usize, self.docs[d].len, avgdl, params);
                scores[d] = scores[d] + c * w;
            }
        }
        scores
    }

    pub fn dot(&self, query: &[T], doc: usize) -> T {
        self.vector(doc).iter().zip(query).map(|(a, b)| *a * *b).sum()
    }

    pub(crate) fn push_row(&mut self, row: Vec<f32>) -> Result<(), RetrievalError> {
        let unit: Vec<T> = unit_from_row(&row).ok_or_else(|| RetrievalError::Format("zero vector".into()))?;
        self.rows.extend(row);
        self.vectors.extend(unit);
        Ok(())
    }

    fn push(&mut self, doc: Document, tokens: &[String], row: Vec<f32>) -> Result<(), RetrievalError> {
        if self.by_sha.contains_key(&doc.sha) {
            return Err(RetrievalError::DuplicateDocument(DocHandle::new(
                doc.sha,
                self.repo.clone(),
            )));
        }
        let id = self.docs.len() as u32;
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for tok in tokens {
            *tf.entry(tok.as_str()).or_default() += 1;
        }
        for (term, count) in tf {
            let t = match self.terms.get(term) {
                Some(&t) => t,
                None => {
                    self.terms.insert(term.to_string(), self.postings.len());
                    self.term_names.push(term.to_string());
                    self.postings.push(Vec::new());
                    self.postings.len() - 1
                }
            };
            self.postings[t].push((id, count));
        }
        self.total_len += doc.len;
        self.by_sha.insert(doc.sha.clone(), self.docs.len());
        self.docs.push(doc);
        self.push_row(row)
    }
}

/// The on-disk form of a vector: normalized in f64, then rounded to f32.
pub(crate) fn storage_row<T: Scalar>(raw: &[T]) -> Option<Vec<f32>> {
    let norm = raw.iter().map(|x| x.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    Some(raw.iter().map(|x| (x.to_f64_lossy() / norm) as f32).collect())
}

/// Scoring vectors are always derived from the stored row, so an index
/// behaves identically before and after a save/load round trip.
pub(crate) fn unit_from_row<T: Scalar>(row: &[f32]) -> Option<Vec<T>> {
    let values: Vec<T> = row.iter().map(|x| T::lit(f64::from(*x))).collect();
    let norm = values.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if !norm.is_finite() || norm == T::zero() {
        return None;
    }
    Some(values.into_iter().map(|x| x / norm).collect())
}

/// Per-project BM25 statistics plus one unit vector per document.
#[derive(Debug, Clone)]
pub struct RetrievalIndex<T> {
    pub(crate) dimension: usize,
    pub(crate) embed_model: String,
    pub(crate) partitions: BTreeMap<String, Partition<T>>,
    pub(crate) params: Bm25Params<T>,
}

impl<T: Scalar> RetrievalIndex<T> {
    pub fn new(dimension: usize, embed_model: impl Into<String>) -> Self {
        RetrievalIndex {
            dimension,
            embed_model: embed_model.into(),
            partitions: BTreeMap::new(),
            params: Bm25Params::default(),
        }
    }

    /// Tokenizes and embeds every record, `workers` at a time, then inserts
    /// them in input order.
    pub fn build(records: &[CommitRecord], embedder: &CachedEmbedder, workers: usize) -> Result<Self, RetrievalError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| RetrievalError::Format(format!("thread pool: {e}")))?;
        let prepared: Vec<Result<Prepared<T>, RetrievalError>> = pool.install(|| {
            records
                .par_iter()
                .map(|r| {
                    let v = embedder.embed::<T>(&r.diff)?;
                    Ok((tokenize(&r.diff).into_inner(), v.into_values()))
                })
                .collect()
        });
        let dimension = embedder.dimension().unwrap_or(0);
        let mut index = RetrievalIndex::new(dimension, embedder.model_id());
        for (record, prepared) in records.iter().zip(prepared) {
            let (tokens, vector) = prepared?;
            index.insert_record(record, &tokens, &vector)?;
        }
        Ok(index)
    }

    pub fn insert_record(
        &mut self,
        record: &CommitRecord,
        tokens: &[String],
        vector: &[T],
    ) -> Result<(), RetrievalError> {
        let doc = Document {
            sha: record.sha.clone(),
            date: record.date,
            diff: record.diff.clone(),
            message: preprocess_message(&record.message),
            len: tokens.len(),
        };
        self.insert(&record.repo_full_name, doc, tokens, vector)
    }

    pub fn insert(&mut self, repo: &str, doc: Document, tokens: &[String], vector: &[T]) -> Result<(), RetrievalError> {
        if self.dimension == 0 {
            self.dimension = vector.len();
        }
        if vector.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dimension,
                got: vector.len(),
            });
        }
        let row = storage_row(vector).ok_or_else(|| RetrievalError::Format(format!("zero vector for {}", doc.sha)))?;
        let dim = self.dimension;
        self.partitions
            .entry(repo.to_string())
            .or_insert_with(|| Partition::new(repo.to_string(), dim))
            .push(doc, tokens, row)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embed_model(&self) -> &str {
        &self.embed_model
    }

    pub fn params(&self) -> &Bm25Params<T> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.partitions.values().map(Partition::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn partition(&self, repo: &str) -> Option<&Partition<T>> {
        self.partitions.get(repo)
    }

    pub fn partitions(&self) -> impl Iterator<Item = &Partition<T>> {
        self.partitions.values()
    }

    pub fn locate(&self, handle: &DocHandle) -> Result<(&Partition<T>, usize), RetrievalError> {
        self.partitions
            .get(&handle.repo_full_name)
            .and_then(|p| p.position(&handle.sha).map(|i| (p, i)))
            .ok_or_else(|| RetrievalError::UnknownDocument(handle.clone()))
    }

    pub fn document(&self, handle: &DocHandle) -> Result<&Document, RetrievalError> {
        self.locate(handle).map(|(p, i)| &p.docs[i])
    }

    pub fn vector(&self, handle: &DocHandle) -> Result<&[T], RetrievalError> {
        self.locate(handle).map(|(p, i)| p.vector(i))
    }
}
