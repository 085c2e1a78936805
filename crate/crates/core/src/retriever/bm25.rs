//! Okapi BM25 over one project partition.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params<T> {
    pub k1: T,
    pub b: T,
}

impl<T: Scalar> Default for Bm25Params<T> {
    fn default() -> Self {
        Bm25Params {
            k1: T::lit(1.2),
            b: T::lit(0.75),
        }
    }
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`, always positive.
pub fn idf<T: Scalar>(doc_count: usize, df: usize) -> T {
    let n = T::from_count(doc_count);
    let df = T::from_count(df);
    let half = T::lit(0.5);
    ((n - df + half) / (df + half) + T::one()).ln()
}

/// Contribution of one query-term occurrence with in-document frequency `tf`.
pub fn term_weight<T: Scalar>(idf: T, tf: usize, doc_len: usize, avgdl: T, params: &Bm25Params<T>) -> T {
    if tf == 0 {
        return T::zero();
    }
    let tf = T::from_count(tf);
    let norm = T::one() - params.b + params.b * T::from_count(doc_len) / avgdl;
    idf * tf * (params.k1 + T::one()) / (tf + params.k1 * norm)
}
