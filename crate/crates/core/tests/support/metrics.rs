//! Naive metric implementations used as test oracles.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_N: usize = 4;

pub fn random_seq(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<String> {
    let len = rng.gen_range(0..=12);
    (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
}

pub fn random_pairs(count: usize, seed: u64) -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            // Small vocabularies make repeats and partial overlaps common.
            let vocab = 3 + i % 8;
            (random_seq(&mut rng, vocab), random_seq(&mut rng, vocab))
        })
        .collect()
}

pub fn grams(v: &[String], n: usize) -> Vec<Vec<String>> {
    if v.len() < n {
        return Vec::new();
    }
    (0..=v.len() - n).map(|i| v[i..i + n].to_vec()).collect()
}

/// Clipped matches by repeatedly crossing off reference n-grams.
pub fn oracle_gleu(h: &[String], r: &[String]) -> f64 {
    if h.is_empty() && r.is_empty() {
        return 1.0;
    }
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let (mut matched, mut ht, mut rt) = (0usize, 0usize, 0usize);
    for n in 1..=MAX_N {
        let hg = grams(h, n);
        let mut rg = grams(r, n);
        ht += hg.len();
        rt += rg.len();
        for g in hg {
            if let Some(pos) = rg.iter().position(|x| *x == g) {
                rg.remove(pos);
                matched += 1;
            }
        }
    }
    let p = matched as f64 / ht as f64;
    let rc = matched as f64 / rt as f64;
    p.min(rc)
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|x| x == *s))
}

/// LCS by enumerating every subsequence of the hypothesis.
pub fn oracle_lcs(h: &[String], r: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << h.len()) {
        let count = mask.count_ones() as usize;
        if count <= best {
            continue;
        }
        let sub: Vec<&String> = (0..h.len()).filter(|i| mask & (1 << i) != 0).map(|i| &h[i]).collect();
        if is_subsequence(&sub, r) {
            best = count;
        }
    }
    best
}

pub fn oracle_rouge(h: &[String], r: &[String]) -> f64 {
    if h.is_empty() && r.is_empty() {
        return 1.0;
    }
    let l = oracle_lcs(h, r);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / h.len() as f64;
    let rc = l as f64 / r.len() as f64;
    2.0 * p * rc / (p + rc)
}

/// Every one-to-one alignment of equal words, by exhaustive search; returns
/// (max matches, min chunks among maximal alignments).
pub fn oracle_alignment(h: &[String], r: &[String]) -> (usize, usize) {
    fn walk(
        i: usize,
        h: &[String],
        r: &[String],
        used: &mut Vec<bool>,
        links: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == h.len() {
            let m = links.len();
            let mut chunks = 0;
            for (k, &(hi, rj)) in links.iter().enumerate() {
                let continues = k > 0 && links[k - 1] == (hi.wrapping_sub(1), rj.wrapping_sub(1));
                if !continues {
                    chunks += 1;
                }
            }
            if m > best.0 || (m == best.0 && chunks < best.1) {
                *best = (m, chunks);
            }
            return;
        }
        for j in 0..r.len() {
            if !used[j] && r[j] == h[i] {
                used[j] = true;
                links.push((i, j));
                walk(i + 1, h, r, used, links, best);
                links.pop();
                used[j] = false;
            }
        }
        walk(i + 1, h, r, used, links, best);
    }
    let mut best = (0, 0);
    walk(0, h, r, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
    best
}

pub fn oracle_meteor(h: &[String], r: &[String]) -> f64 {
    let (m, chunks) = oracle_alignment(h, r);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / h.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f = p * rc / (0.9 * p + 0.1 * rc);
    f * (1.0 - 0.5 * (chunks as f64 / m as f64).powi(3))
}

/// Dense TF-IDF vectors over the full n-gram vocabulary of the corpus.
pub fn oracle_cider(h: &[String], r: &[String], refs: &[Vec<String>]) -> f64 {
    let n_docs = refs.len() as f64;
    let mut total = 0.0;
    for n in 1..=MAX_N {
        let mut vocab: BTreeSet<Vec<String>> = BTreeSet::new();
        vocab.extend(grams(h, n));
        vocab.extend(grams(r, n));
        let vocab: Vec<Vec<String>> = vocab.into_iter().collect();
        let idf = |g: &Vec<String>| {
            let df = refs.iter().filter(|d| grams(d, n).contains(g)).count().max(1);
            (n_docs / df as f64).ln()
        };
        let dense = |v: &[String]| -> Vec<f64> {
            let gs = grams(v, n);
            vocab
                .iter()
                .map(|g| {
                    if gs.is_empty() {
                        0.0
                    } else {
                        gs.iter().filter(|x| *x == g).count() as f64 / gs.len() as f64 * idf(g)
                    }
                })
                .collect()
        };
        let (a, b) = (dense(h), dense(r));
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na > 0.0 && nb > 0.0 {
            total += dot / (na * nb);
        }
    }
    100.0 * total / MAX_N as f64
}
