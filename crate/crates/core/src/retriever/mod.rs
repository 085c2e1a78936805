//! Hybrid lexical + dense retrieval of example pairs within one project.

mod bm25;
mod fusion;
mod index;
mod store;

pub use bm25::{idf, term_weight, Bm25Params};
pub use fusion::{fuse, min_max};
pub use index::{DocHandle, Document, Partition, RetrievalIndex};
pub use store::{IndexManifest, INDEX_FORMAT_VERSION};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::providers::{CachedEmbedder, ProviderError};
use crate::scalar::Scalar;
use crate::tokenizer::tokenize;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("document not in index: {}@{}", .0.sha, .0.repo_full_name)]
    UnknownDocument(DocHandle),
    #[error("document indexed twice: {}@{}", .0.sha, .0.repo_full_name)]
    DuplicateDocument(DocHandle),
    #[error("vector dimension mismatch: index has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no admissible candidates in project {repo}")]
    EmptyScope { repo: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScoredCandidate<T> {
    pub handle: DocHandle,
    pub lexical_score: T,
    pub semantic_score: T,
    pub hybrid_score: T,
}

/// A retrieved `(diff, message)` pair used to augment a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExamplePair<T> {
    pub diff: String,
    pub message: String,
    pub handle: DocHandle,
    pub hybrid_score: T,
}

/// Retrieval output; `pairs` may be shorter than requested when the
/// project has too few admissible candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved<T> {
    pub pairs: Vec<ExamplePair<T>>,
    pub requested: usize,
}

impl<T> Retrieved<T> {
    /// Missing pairs, if any.
    pub fn shortfall(&self) -> Option<usize> {
        (self.pairs.len() < self.requested).then(|| self.requested - self.pairs.len())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub diff: &'a str,
    pub k: usize,
    pub repo: &'a str,
    pub exclude_sha: Option<&'a str>,
}

impl<'a> Query<'a> {
    pub fn new(diff: &'a str, k: usize, repo: &'a str) -> Self {
        Query {
            diff,
            k,
            repo,
            exclude_sha: None,
        }
    }

    pub fn excluding(mut self, sha: &'a str) -> Self {
        self.exclude_sha = Some(sha);
        self
    }
}

pub fn bm25_score<T: Scalar>(
    query_tokens: &[String],
    doc: &DocHandle,
    index: &RetrievalIndex<T>,
) -> Result<T, RetrievalError> {
    let (p, i) = index.locate(doc)?;
    Ok(p.bm25(query_tokens, i, index.params()))
}

pub fn semantic_score<T: Scalar>(
    query_vec: &[T],
    doc: &DocHandle,
    index: &RetrievalIndex<T>,
) -> Result<T, RetrievalError> {
    let (p, i) = index.locate(doc)?;
    if query_vec.len() != index.dimension() {
        return Err(RetrievalError::DimensionMismatch {
            expected: index.dimension(),
            got: query_vec.len(),
        });
    }
    Ok(p.dot(query_vec, i))
}

/// Every admissible candidate in the scope, best first. Byte-identical
/// diffs are still included here; [`retrieve`] skips them.
pub fn rank_candidates<T: Scalar>(
    query: &Query<'_>,
    query_vec: &[T],
    index: &RetrievalIndex<T>,
) -> Result<Vec<ScoredCandidate<T>>, RetrievalError> {
    if query_vec.len() != index.dimension() {
        return Err(RetrievalError::DimensionMismatch {
            expected: index.dimension(),
            got: query_vec.len(),
        });
    }
    let empty = || RetrievalError::EmptyScope {
        repo: query.repo.to_string(),
    };
    let partition = index.partition(query.repo).ok_or_else(empty)?;
    let tokens = tokenize(query.diff);
    let lexical = partition.bm25_all(&tokens, index.params());
    let admitted: Vec<usize> = (0..partition.len())
        .filter(|&i| Some(partition.docs[i].sha.as_str()) != query.exclude_sha)
        .collect();
    if admitted.is_empty() {
        return Err(empty());
    }
    let pairs: Vec<(T, T)> = admitted
        .iter()
        .map(|&i| (lexical[i], partition.dot(query_vec, i)))
        .collect();
    let hybrid = fuse(&pairs);
    let mut ranked: Vec<(usize, ScoredCandidate<T>)> = admitted
        .iter()
        .zip(pairs.iter().zip(hybrid))
        .map(|(&i, (&(lex, sem), h))| {
            let cand = ScoredCandidate {
                handle: DocHandle::new(partition.docs[i].sha.clone(), partition.repo.clone()),
                lexical_score: lex,
                semantic_score: sem,
                hybrid_score: h,
            };
            (i, cand)
        })
        .collect();
    ranked.sort_by(|(i, a), (j, b)| {
        let (da, db) = (&partition.docs[*i], &partition.docs[*j]);
        b.hybrid_score
            .partial_cmp(&a.hybrid_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| db.date.cmp(&da.date))
            .then_with(|| da.sha.cmp(&db.sha))
    });
    Ok(ranked.into_iter().map(|(_, c)| c).collect())
}

/// Top-`k` pairs for an already embedded query.
pub fn retrieve_with_vector<T: Scalar>(
    query: &Query<'_>,
    query_vec: &[T],
    index: &RetrievalIndex<T>,
) -> Result<Retrieved<T>, RetrievalError> {
    if query.k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let ranked = rank_candidates(query, query_vec, index)?;
    let partition = index.partition(query.repo).expect("ranked implies partition");
    let pairs: Vec<ExamplePair<T>> = ranked
        .into_iter()
        .filter_map(|c| {
            let doc = &partition.docs[partition.position(&c.handle.sha)?];
            (doc.diff != query.diff).then(|| ExamplePair {
                diff: doc.diff.clone(),
                message: doc.message.clone(),
                handle: c.handle,
                hybrid_score: c.hybrid_score,
            })
        })
        .take(query.k)
        .collect();
    if pairs.is_empty() {
        return Err(RetrievalError::EmptyScope {
            repo: query.repo.to_string(),
        });
    }
    if pairs.len() < query.k {
        log::warn!(
            "only {} of {} example pairs available in {}",
            pairs.len(),
            query.k,
            query.repo
        );
    }
    Ok(Retrieved {
        pairs,
        requested: query.k,
    })
}

/// Embeds the query diff and returns its top-`k` example pairs.
pub fn retrieve<T: Scalar>(
    query: &Query<'_>,
    index: &RetrievalIndex<T>,
    embedder: &CachedEmbedder,
) -> Result<Retrieved<T>, RetrievalError> {
    if query.k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let v = embedder.embed::<T>(query.diff)?;
    retrieve_with_vector(query, v.values(), index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn doc(sha: &str, diff: &str, day: u32) -> (Document, Vec<String>) {
        let tokens = tokenize(diff).into_inner();
        let d = Document {
            sha: sha.into(),
            date: chrono::Utc.with_ymd_and_hms(2024, 1, day, 0, 0, 0).unwrap(),
            diff: diff.into(),
            message: format!("msg {sha}"),
            len: tokens.len(),
        };
        (d, tokens)
    }

    fn index(docs: &[(&str, &str, u32, [f64; 2])]) -> RetrievalIndex<f64> {
        let mut idx = RetrievalIndex::new(2, "test");
        for (sha, diff, day, v) in docs {
            let (d, t) = doc(sha, diff, *day);
            idx.insert("o/r", d, &t, v).unwrap();
        }
        idx
    }

    #[test]
    fn bm25_single_doc_hand_value() {
        let idx = index(&[("a", "foo bar foo", 1, [1.0, 0.0])]);
        let q = tokenize("foo").into_inner();
        // N=1, df=1, tf=2, |d|=avgdl=3
        let idf = (0.5f64 / 1.5 + 1.0).ln();
        let expected = idf * 2.0 * 2.2 / (2.0 + 1.2);
        let got = bm25_score(&q, &DocHandle::new("a", "o/r"), &idx).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let none = bm25_score(&tokenize("baz").into_inner(), &DocHandle::new("a", "o/r"), &idx).unwrap();
        assert_eq!(none, 0.0);
    }

    #[test]
    fn unknown_documents_and_dimensions() {
        let idx = index(&[("a", "x", 1, [1.0, 0.0])]);
        let h = DocHandle::new("zz", "o/r");
        assert!(matches!(
            bm25_score(&[], &h, &idx),
            Err(RetrievalError::UnknownDocument(_))
        ));
        let a = DocHandle::new("a", "o/r");
        assert!(matches!(
            semantic_score(&[1.0], &a, &idx),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
        assert_eq!(semantic_score(&[1.0, 0.0], &a, &idx).unwrap(), 1.0);
        assert_eq!(semantic_score(&[0.0, 1.0], &a, &idx).unwrap(), 0.0);
    }

    #[test]
    fn leakage_guard_takes_the_next_candidate() {
        let idx = index(&[
            ("a", "int x = 1;", 1, [1.0, 0.0]),
            ("b", "int x = 2;", 2, [0.8, 0.6]),
            ("c", "unrelated text", 3, [0.0, 1.0]),
        ]);
        let q = Query::new("int x = 1;", 1, "o/r");
        let r = retrieve_with_vector(&q, &[1.0, 0.0], &idx).unwrap();
        assert_eq!(r.pairs[0].handle.sha, "b");

        let excl = Query::new("int x = 1;", 5, "o/r").excluding("b");
        let r = retrieve_with_vector(&excl, &[1.0, 0.0], &idx).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].handle.sha, "c");
        assert_eq!(r.shortfall(), Some(4));
    }

    #[test]
    fn empty_scope_and_ties() {
        let idx = index(&[("a", "same", 1, [1.0, 0.0]), ("b", "same", 5, [1.0, 0.0])]);
        let q = Query::new("other", 2, "o/r");
        let r = retrieve_with_vector(&q, &[1.0, 0.0], &idx).unwrap();
        // Equal scores: newer first.
        assert_eq!(r.pairs[0].handle.sha, "b");
        assert!(matches!(
            retrieve_with_vector(&Query::new("x", 1, "none/x"), &[1.0, 0.0], &idx),
            Err(RetrievalError::EmptyScope { .. })
        ));
        let single = index(&[("a", "same", 1, [1.0, 0.0])]);
        assert!(matches!(
            retrieve_with_vector(&Query::new("x", 1, "o/r").excluding("a"), &[1.0, 0.0], &single),
            Err(RetrievalError::EmptyScope { .. })
        ));
        assert!(matches!(
            retrieve_with_vector(&Query::new("same", 1, "o/r"), &[1.0, 0.0], &single),
            Err(RetrievalError::EmptyScope { .. })
        ));
        assert!(matches!(
            retrieve_with_vector(&Query::new("x", 0, "o/r"), &[1.0, 0.0], &single),
            Err(RetrievalError::InvalidK)
        ));
    }
}
