use crate::commit::TokenSequence;
use crate::metrics::ngram;
use crate::scalar::Scalar;

/// Sentence-level Google-BLEU in `[0, 1]`.
///
/// Matched n-grams (clipped multiset intersection) are pooled over orders
/// `1..=max_n`; the score is the smaller of pooled precision and recall.
pub fn gleu<T: Scalar>(hyp: &TokenSequence, reference: &TokenSequence, max_n: usize) -> T {
    assert!(max_n >= 1, "max_n must be at least 1");
    match (hyp.is_empty(), reference.is_empty()) {
        (true, true) => return T::one(),
        (true, false) | (false, true) => return T::zero(),
        _ => {}
    }
    let (mut matched, mut hyp_total, mut ref_total) = (0usize, 0usize, 0usize);
    for n in 1..=max_n {
        hyp_total += ngram::total(hyp.len(), n);
        ref_total += ngram::total(reference.len(), n);
        let ref_counts = ngram::counts(reference, n);
        for (gram, count) in ngram::counts(hyp, n) {
            if let Some(&rc) = ref_counts.get(gram) {
                matched += count.min(rc);
            }
        }
    }
    let matched = T::from_count(matched);
    let precision = matched / T::from_count(hyp_total);
    let recall = matched / T::from_count(ref_total);
    precision.min(recall)
}
