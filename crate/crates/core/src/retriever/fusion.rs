//! Equal-weight fusion of min-max normalized score families.

use crate::scalar::Scalar;

/// Maps `scores` onto `[0, 1]`; a constant family maps to 0.5 everywhere.
pub fn min_max<T: Scalar>(scores: &[T]) -> Vec<T> {
    let Some(&first) = scores.first() else {
        return Vec::new();
    };
    let (lo, hi) = scores
        .iter()
        .fold((first, first), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if hi == lo {
        return vec![T::lit(0.5); scores.len()];
    }
    let span = hi - lo;
    scores.iter().map(|&s| (s - lo) / span).collect()
}

/// Hybrid score per `(lexical, semantic)` candidate.
pub fn fuse<T: Scalar>(candidates: &[(T, T)]) -> Vec<T> {
    let lex: Vec<T> = candidates.iter().map(|c| c.0).collect();
    let sem: Vec<T> = candidates.iter().map(|c| c.1).collect();
    let half = T::lit(0.5);
    min_max(&lex)
        .into_iter()
        .zip(min_max(&sem))
        .map(|(l, s)| half * l + half * s)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate_is_half() {
        assert_eq!(fuse(&[(3.2f64, 0.4)]), vec![0.5]);
    }

    #[test]
    fn dominant_candidate_is_one() {
        let h = fuse(&[(1.0f64, 0.1), (5.0, 0.9), (2.0, 0.3)]);
        assert_eq!(h[1], 1.0);
        assert_eq!(h[0], 0.0);
        assert!(h.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn constant_family_is_neutral() {
        let h = fuse(&[(0.0f32, 0.2), (0.0, 0.6)]);
        assert_eq!(h, vec![0.25, 0.75]);
        assert!(fuse::<f64>(&[]).is_empty());
    }
}
