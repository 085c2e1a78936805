use std::collections::HashMap;

/// Multiset of the order-`n` n-grams of `tokens`, borrowed from the input.
pub(crate) fn counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for gram in tokens.windows(n) {
        *out.entry(gram).or_insert(0) += 1;
    }
    out
}

/// Number of order-`n` n-grams in a sequence of `len` tokens.
pub(crate) fn total(len: usize, n: usize) -> usize {
    (len + 1).saturating_sub(n)
}
