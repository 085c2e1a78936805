//! METEOR with exact unigram matching.
//!
//! The alignment has the maximum number of matches and, among those, the
//! fewest chunks (maximal runs contiguous in both sequences). Chunk
//! minimisation over permutations is equivalent to minimum common string
//! partition, so the search is exponential in the worst case; it is exact
//! under a state budget and falls back to a greedy alignment beyond it.

use std::collections::HashMap;

use crate::commit::TokenSequence;
use crate::scalar::Scalar;

/// Above this many memoised states the greedy aligner is used instead.
pub const EXACT_STATE_BUDGET: usize = 250_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Scalar> Default for MeteorParams<T> {
    fn default() -> Self {
        MeteorParams {
            alpha: T::lit(0.9),
            beta: T::lit(3.0),
            gamma: T::lit(0.5),
        }
    }
}

/// Matches and chunks of the chosen alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
    /// False when the state budget forced the greedy fallback.
    pub exact: bool,
}

/// METEOR in `[0, 1]` with the canonical parameters.
pub fn meteor<T: Scalar>(hyp: &TokenSequence, reference: &TokenSequence) -> T {
    meteor_with(hyp, reference, &MeteorParams::default())
}

pub fn meteor_with<T: Scalar>(hyp: &TokenSequence, reference: &TokenSequence, params: &MeteorParams<T>) -> T {
    let al = align(hyp, reference);
    score_alignment(al.matches, al.chunks, hyp.len(), reference.len(), params)
}

/// Closed-form score for a given alignment summary.
pub fn score_alignment<T: Scalar>(
    matches: usize,
    chunks: usize,
    hyp_len: usize,
    ref_len: usize,
    params: &MeteorParams<T>,
) -> T {
    if matches == 0 {
        return T::zero();
    }
    let m = T::from_count(matches);
    let p = m / T::from_count(hyp_len);
    let r = m / T::from_count(ref_len);
    let f_mean = p * r / (params.alpha * p + (T::one() - params.alpha) * r);
    let frag = T::from_count(chunks) / m;
    let penalty = params.gamma * frag.powf(params.beta);
    f_mean * (T::one() - penalty)
}

pub fn align(hyp: &[String], reference: &[String]) -> Alignment {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let h = intern(hyp, &mut ids);
    let r = intern(reference, &mut ids);
    let vocab = ids.len();

    let mut hyp_count = vec![0usize; vocab];
    let mut ref_count = vec![0usize; vocab];
    h.iter().for_each(|&w| hyp_count[w] += 1);
    r.iter().for_each(|&w| ref_count[w] += 1);
    let quota: Vec<usize> = (0..vocab).map(|w| hyp_count[w].min(ref_count[w])).collect();
    let matches: usize = quota.iter().sum();
    if matches == 0 {
        return Alignment {
            matches: 0,
            chunks: 0,
            exact: true,
        };
    }

    let mut search = Search::new(&h, &r, quota.clone());
    match search.best(0, None) {
        Some(cont) if !search.exhausted => Alignment {
            matches,
            chunks: matches - cont,
            exact: true,
        },
        _ => Alignment {
            matches,
            chunks: greedy_chunks(&h, &r, &quota),
            exact: false,
        },
    }
}

fn intern<'a>(tokens: &'a [String], ids: &mut HashMap<&'a str, usize>) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| {
            let next = ids.len();
            *ids.entry(t.as_str()).or_insert(next)
        })
        .collect()
}

struct Search<'a> {
    hyp: &'a [usize],
    reference: &'a [usize],
    /// Matches still owed per word.
    need: Vec<usize>,
    /// Occurrences of each word at hyp positions >= the current one.
    hyp_left: Vec<usize>,
    ref_positions: Vec<Vec<usize>>,
    used: Vec<u64>,
    memo: HashMap<(usize, Option<usize>, Vec<u64>), Option<usize>>,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn new(hyp: &'a [usize], reference: &'a [usize], quota: Vec<usize>) -> Self {
        let vocab = quota.len();
        let mut hyp_left = vec![0usize; vocab];
        hyp.iter().for_each(|&w| hyp_left[w] += 1);
        let mut ref_positions = vec![Vec::new(); vocab];
        for (j, &w) in reference.iter().enumerate() {
            ref_positions[w].push(j);
        }
        Search {
            hyp,
            reference,
            need: quota,
            hyp_left,
            ref_positions,
            used: vec![0u64; reference.len().div_ceil(64)],
            memo: HashMap::new(),
            exhausted: false,
        }
    }

    fn is_used(&self, j: usize) -> bool {
        self.used[j / 64] & (1 << (j % 64)) != 0
    }

    fn toggle(&mut self, j: usize) {
        self.used[j / 64] ^= 1 << (j % 64);
    }

    /// Maximum number of continuation links (hyp i -> ref j following
    /// hyp i-1 -> ref j-1) from position `i` on, or `None` if the match
    /// quotas cannot be met.
    fn best(&mut self, i: usize, prev: Option<usize>) -> Option<usize> {
        if i == self.hyp.len() {
            return self.need.iter().all(|&n| n == 0).then_some(0);
        }
        if self.exhausted {
            return None;
        }
        let w = self.hyp[i];
        // Only the previous link matters, and only if it can be continued.
        let prev_key = prev.filter(|&j| j + 1 < self.reference.len() && self.reference[j + 1] == w);
        let key = (i, prev_key, self.used.clone());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        if self.memo.len() >= EXACT_STATE_BUDGET {
            self.exhausted = true;
            return None;
        }

        let mut best: Option<usize> = None;
        self.hyp_left[w] -= 1;
        if self.need[w] > 0 {
            self.need[w] -= 1;
            for idx in 0..self.ref_positions[w].len() {
                let j = self.ref_positions[w][idx];
                if self.is_used(j) {
                    continue;
                }
                self.toggle(j);
                if let Some(rest) = self.best(i + 1, Some(j)) {
                    let gain = usize::from(prev_key.is_some_and(|p| p + 1 == j));
                    best = best.max(Some(rest + gain));
                }
                self.toggle(j);
            }
            self.need[w] += 1;
        }
        if self.hyp_left[w] >= self.need[w] {
            if let Some(rest) = self.best(i + 1, None) {
                best = best.max(Some(rest));
            }
        }
        self.hyp_left[w] += 1;

        if !self.exhausted {
            self.memo.insert(key, best);
        }
        best
    }
}

/// Left-to-right alignment preferring the ref position right after the
/// previous link; still achieves the maximum match count.
fn greedy_chunks(hyp: &[usize], reference: &[usize], quota: &[usize]) -> usize {
    let vocab = quota.len();
    let mut need = quota.to_vec();
    let mut hyp_left = vec![0usize; vocab];
    hyp.iter().for_each(|&w| hyp_left[w] += 1);
    let mut used = vec![false; reference.len()];
    let mut prev: Option<usize> = None;
    let mut chunks = 0;
    for &w in hyp {
        hyp_left[w] -= 1;
        // Skip only while later occurrences can still satisfy the quota.
        let must = need[w] > hyp_left[w];
        let next = prev
            .map(|p| p + 1)
            .filter(|&j| j < reference.len() && reference[j] == w && !used[j]);
        let pick = if need[w] == 0 {
            None
        } else if next.is_some() {
            next
        } else if must {
            (0..reference.len()).find(|&j| reference[j] == w && !used[j])
        } else {
            None
        };
        match pick {
            Some(j) => {
                used[j] = true;
                need[w] -= 1;
                if next != Some(j) {
                    chunks += 1;
                }
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    chunks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &[&str]) -> TokenSequence {
        TokenSequence::try_from(s).unwrap()
    }

    #[test]
    fn identity_three_tokens() {
        let a = seq(&["fix", "null", "pointer"]);
        let al = align(&a, &a);
        assert_eq!((al.matches, al.chunks, al.exact), (3, 1, true));
        let s: f64 = meteor(&a, &a);
        assert!((s - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
        assert!((s - 0.981481).abs() < 1e-6);
    }

    #[test]
    fn swapped_pair() {
        let al = align(&seq(&["b", "a"]), &seq(&["a", "b"]));
        assert_eq!((al.matches, al.chunks), (2, 2));
        let s: f64 = meteor(&seq(&["b", "a"]), &seq(&["a", "b"]));
        assert!((s - (1.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(meteor::<f64>(&seq(&["a"]), &seq(&["b"])), 0.0);
        assert_eq!(meteor::<f64>(&seq(&[]), &seq(&["b"])), 0.0);
    }

    #[test]
    fn repeated_words_pick_the_contiguous_alignment() {
        // A greedy left-to-right aligner links the first "a" to ref[0] and
        // ends with 2 chunks; the optimum is a single chunk.
        let hyp = seq(&["a", "b", "c"]);
        let r = seq(&["a", "x", "a", "b", "c"]);
        let al = align(&hyp, &r);
        assert_eq!((al.matches, al.chunks), (3, 1));
    }

    #[test]
    fn surplus_hyp_occurrences_choose_best_position() {
        let hyp = seq(&["a", "x", "a", "b"]);
        let r = seq(&["a", "b"]);
        assert_eq!(align(&hyp, &r).chunks, 1);
    }

    #[test]
    fn greedy_fallback_keeps_match_count() {
        let h = [0usize, 1, 0, 1, 0];
        let r = [1usize, 0, 1, 0];
        let quota = [2usize, 2];
        let chunks = greedy_chunks(&h, &r, &quota);
        assert!((1..=4).contains(&chunks));
    }

    #[test]
    fn long_repetitive_input_finishes() {
        let words: Vec<String> = (0..120).map(|i| ["a", "b"][i % 2].to_string()).collect();
        let t = TokenSequence::new(words).unwrap();
        let al = align(&t, &t);
        assert_eq!(al.matches, 120);
        assert!(al.chunks >= 1);
    }
}
