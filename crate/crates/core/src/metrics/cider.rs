//! TF-IDF weighted n-gram consensus (CIDEr).

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::commit::TokenSequence;
use crate::metrics::{ngram, MetricsError};
use crate::scalar::Scalar;

/// Output scale of [`cider_scaled`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiderScale {
    /// `100 * mean cosine`, maximum 100.
    #[default]
    Percent,
    /// `10 * mean cosine`, maximum 10.
    Canonical,
}

impl CiderScale {
    fn factor<T: Scalar>(self) -> T {
        match self {
            CiderScale::Percent => T::lit(100.0),
            CiderScale::Canonical => T::lit(10.0),
        }
    }
}

/// Document frequencies over a reference set, stored as `ln(N / df)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable<T> {
    weights: HashMap<Vec<String>, T>,
    doc_count: usize,
    /// Weight for n-grams seen in no reference (df treated as 1).
    unseen: T,
    max_n: usize,
}

impl<T: Scalar> IdfTable<T> {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn idf(&self, gram: &[String]) -> T {
        self.weights.get(gram).copied().unwrap_or(self.unseen)
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        IdfTable {
            weights: self.weights.iter().map(|(g, w)| (g.clone(), *w * factor)).collect(),
            doc_count: self.doc_count,
            unseen: self.unseen * factor,
            max_n: self.max_n,
        }
    }
}

/// Counts, for every n-gram of order `1..=max_n`, how many references
/// contain it.
pub fn build_idf<T: Scalar>(references: &[TokenSequence], max_n: usize) -> Result<IdfTable<T>, MetricsError> {
    if references.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut df: HashMap<&[String], usize> = HashMap::new();
    for r in references {
        let mut seen: HashSet<&[String]> = HashSet::new();
        for n in 1..=max_n {
            seen.extend(r.windows(n));
        }
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let n_docs = T::from_count(references.len());
    let weights = df
        .into_iter()
        .map(|(g, d)| (g.to_vec(), (n_docs / T::from_count(d)).ln()))
        .collect();
    Ok(IdfTable {
        weights,
        doc_count: references.len(),
        unseen: n_docs.ln(),
        max_n,
    })
}

// Ordered so that floating-point sums do not depend on hash seeds.
fn tfidf_vector<'a, T: Scalar>(tokens: &'a [String], n: usize, idf: &IdfTable<T>) -> BTreeMap<&'a [String], T> {
    let total = ngram::total(tokens.len(), n);
    if total == 0 {
        return BTreeMap::new();
    }
    let total = T::from_count(total);
    ngram::counts(tokens, n)
        .into_iter()
        .map(|(g, c)| (g, T::from_count(c) / total * idf.idf(g)))
        .collect()
}

fn cosine<T: Scalar>(a: &BTreeMap<&[String], T>, b: &BTreeMap<&[String], T>) -> T {
    let norm = |v: &BTreeMap<&[String], T>| v.values().map(|x| *x * *x).sum::<T>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    let dot: T = a.iter().filter_map(|(g, x)| b.get(g).map(|y| *x * *y)).sum();
    dot / (na * nb)
}

/// CIDEr on the 0–100 scale.
pub fn cider<T: Scalar>(hyp: &TokenSequence, reference: &TokenSequence, idf: &IdfTable<T>, max_n: usize) -> T {
    cider_scaled(hyp, reference, idf, max_n, CiderScale::Percent)
}

pub fn cider_scaled<T: Scalar>(
    hyp: &TokenSequence,
    reference: &TokenSequence,
    idf: &IdfTable<T>,
    max_n: usize,
    scale: CiderScale,
) -> T {
    assert!(max_n >= 1, "max_n must be at least 1");
    let mut sum = T::zero();
    for n in 1..=max_n {
        let h = tfidf_vector(hyp, n, idf);
        let r = tfidf_vector(reference, n, idf);
        sum = sum + cosine(&h, &r);
    }
    scale.factor::<T>() / T::from_count(max_n) * sum
}
