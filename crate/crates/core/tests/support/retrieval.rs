//! Exhaustive hybrid ranking over raw records, sharing nothing with the
//! index but the tokenizer and the embedder.

use std::collections::HashMap;

use commitrag::providers::CachedEmbedder;
use commitrag::{tokenize, CommitRecord};

/// The stored form of an embedding: unit length in f64, rounded to f32,
/// then renormalised.
pub fn stored_unit(embedder: &CachedEmbedder, text: &str) -> Vec<f64> {
    let v = embedder.embed::<f64>(text).unwrap().into_values();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let row: Vec<f64> = v.iter().map(|x| f64::from((x / norm) as f32)).collect();
    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    row.into_iter().map(|x| x / norm).collect()
}

/// Queries are scored at full precision; only stored documents pass
/// through f32.
pub fn query_unit(embedder: &CachedEmbedder, text: &str) -> Vec<f64> {
    let v = embedder.embed::<f64>(text).unwrap().into_values();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub struct OracleDoc {
    pub record: CommitRecord,
    tokens: Vec<String>,
    unit: Vec<f64>,
}

pub fn oracle_docs(records: &[CommitRecord], embedder: &CachedEmbedder) -> Vec<OracleDoc> {
    records
        .iter()
        .map(|r| OracleDoc {
            record: r.clone(),
            tokens: tokenize(&r.diff).into_inner(),
            unit: stored_unit(embedder, &r.diff),
        })
        .collect()
}

fn bm25(query: &[String], docs: &[OracleDoc]) -> Vec<f64> {
    let (k1, b) = (1.2, 0.75);
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.tokens.len()).sum::<usize>() as f64 / n;
    let df: HashMap<&String, f64> = query
        .iter()
        .map(|q| (q, docs.iter().filter(|o| o.tokens.contains(q)).count() as f64))
        .collect();
    docs.iter()
        .map(|d| {
            let mut score = 0.0;
            for q in query {
                let tf = d.tokens.iter().filter(|t| *t == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = ((n - df[q] + 0.5) / (df[q] + 0.5) + 1.0).ln();
                let len = d.tokens.len() as f64;
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
            }
            score
        })
        .collect()
}

fn normalise(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    xs.iter()
        .map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
        .collect()
}

/// Every admissible document of one partition with its hybrid score, best
/// first. `docs` must all belong to the same project.
pub fn oracle_rank<'a>(
    query: &str,
    query_unit: &[f64],
    docs: &'a [OracleDoc],
    exclude: Option<&str>,
) -> Vec<(&'a OracleDoc, f64)> {
    let q = tokenize(query).into_inner();
    // Collection statistics include the excluded document.
    let lex_all = bm25(&q, docs);
    let admitted: Vec<usize> = (0..docs.len())
        .filter(|&i| Some(docs[i].record.sha.as_str()) != exclude)
        .collect();
    let lex: Vec<f64> = admitted.iter().map(|&i| lex_all[i]).collect();
    let sem: Vec<f64> = admitted
        .iter()
        .map(|&i| docs[i].unit.iter().zip(query_unit).map(|(a, b)| a * b).sum())
        .collect();
    let (nl, ns) = (normalise(&lex), normalise(&sem));
    let mut out: Vec<(&OracleDoc, f64)> = admitted
        .iter()
        .enumerate()
        .map(|(k, &i)| (&docs[i], 0.5 * nl[k] + 0.5 * ns[k]))
        .collect();
    out.sort_by(|(a, x), (b, y)| {
        y.partial_cmp(x)
            .unwrap()
            .then(b.record.date.cmp(&a.record.date))
            .then(a.record.sha.cmp(&b.record.sha))
    });
    out
}

/// Top-k after dropping candidates whose diff equals the query byte for byte.
pub fn oracle_top_k<'a>(
    query: &str,
    query_unit: &[f64],
    docs: &'a [OracleDoc],
    exclude: Option<&str>,
    k: usize,
) -> Vec<(&'a OracleDoc, f64)> {
    oracle_rank(query, query_unit, docs, exclude)
        .into_iter()
        .filter(|(d, _)| d.record.diff != query)
        .take(k)
        .collect()
}

pub fn by_repo(records: &[CommitRecord]) -> HashMap<String, Vec<CommitRecord>> {
    let mut out: HashMap<String, Vec<CommitRecord>> = HashMap::new();
    for r in records {
        out.entry(r.repo_full_name.clone()).or_default().push(r.clone());
    }
    out
}
