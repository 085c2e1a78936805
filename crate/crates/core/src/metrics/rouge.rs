use crate::commit::TokenSequence;
use crate::scalar::Scalar;

/// Length of the longest common subsequence, two-row table.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 in `[0, 1]`.
pub fn rouge_l<T: Scalar>(hyp: &TokenSequence, reference: &TokenSequence) -> T {
    if hyp.is_empty() && reference.is_empty() {
        return T::one();
    }
    let l = lcs_len(hyp, reference);
    if l == 0 {
        return T::zero();
    }
    let l = T::from_count(l);
    let p = l / T::from_count(hyp.len());
    let r = l / T::from_count(reference.len());
    T::lit(2.0) * p * r / (p + r)
}
