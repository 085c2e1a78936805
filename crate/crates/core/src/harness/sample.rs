//! Seeded, language-stratified subset sampling.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commit::CommitRecord;
use crate::diff::Language;
use crate::harness::HarnessError;

/// Indices (ascending) of `n` records: one guaranteed draw per language
/// present, the rest uniform over what is left. When `n` is smaller than
/// the number of languages, a random `n` of them get their draw.
pub fn sample_subset(records: &[CommitRecord], n: usize, seed: u64) -> Result<Vec<usize>, HarnessError> {
    if n > records.len() {
        return Err(HarnessError::CorpusTooSmall {
            requested: n,
            available: records.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: BTreeMap<Language, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata.entry(r.language()).or_default().push(i);
    }
    let mut languages: Vec<Language> = strata.keys().copied().collect();
    if n < languages.len() {
        languages.shuffle(&mut rng);
        languages.truncate(n);
        languages.sort();
    }
    let mut taken = vec![false; records.len()];
    let mut picked = Vec::with_capacity(n);
    for lang in languages {
        let members = &strata[&lang];
        let i = members[rng.gen_range(0..members.len())];
        taken[i] = true;
        picked.push(i);
    }
    let rest: Vec<usize> = (0..records.len()).filter(|&i| !taken[i]).collect();
    let extra = n - picked.len();
    picked.extend(index::sample(&mut rng, rest.len(), extra).into_iter().map(|j| rest[j]));
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::mixed_corpus;
    use std::collections::BTreeSet;

    #[test]
    fn whole_corpus_and_determinism() {
        let c = mixed_corpus(40, 2, 3);
        assert_eq!(sample_subset(&c, 40, 1).unwrap(), (0..40).collect::<Vec<_>>());
        assert_eq!(sample_subset(&c, 15, 9).unwrap(), sample_subset(&c, 15, 9).unwrap());
        assert_ne!(sample_subset(&c, 15, 9).unwrap(), sample_subset(&c, 15, 10).unwrap());
        assert!(matches!(
            sample_subset(&c, 41, 1),
            Err(HarnessError::CorpusTooSmall {
                requested: 41,
                available: 40
            })
        ));
    }

    #[test]
    fn every_language_is_drawn() {
        let c = mixed_corpus(300, 3, 5);
        for seed in 0..20 {
            let s = sample_subset(&c, 20, seed).unwrap();
            assert_eq!(s.len(), 20);
            let langs: BTreeSet<Language> = s.iter().map(|&i| c[i].language()).collect();
            assert_eq!(langs.len(), 9);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn fewer_draws_than_languages() {
        let c = mixed_corpus(50, 1, 5);
        let s = sample_subset(&c, 4, 2).unwrap();
        let langs: BTreeSet<Language> = s.iter().map(|&i| c[i].language()).collect();
        assert_eq!(langs.len(), 4);
    }
}
