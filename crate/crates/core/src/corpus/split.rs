use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{DatasetSplit, SplitName};
use super::CorpusError;

/// Fractions of the corpus assigned to each split. Must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let sum = self.train + self.valid + self.test;
        if self.train < 0.0 || self.valid < 0.0 || self.test < 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(self.train, self.valid, self.test));
        }
        Ok(())
    }
}

/// Splits CVE ids into train/valid/test by seeded shuffle.
///
/// Sizes are `floor(N * valid)` and `floor(N * test)`; train takes the
/// remainder, so every id lands in exactly one split. The same seed always
/// produces the same assignment.
pub fn split_dataset(
    cve_ids: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<Vec<DatasetSplit>, CorpusError> {
    ratios.validate()?;
    if cve_ids.len() < 3 {
        return Err(CorpusError::TooFewIds(cve_ids.len()));
    }
    let mut seen = BTreeSet::new();
    for id in cve_ids {
        if !seen.insert(id.as_str()) {
            return Err(CorpusError::DuplicateCveId(id.clone()));
        }
    }

    let mut shuffled: Vec<&String> = cve_ids.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let valid_n = (n as f64 * ratios.valid).floor() as usize;
    let test_n = (n as f64 * ratios.test).floor() as usize;
    let train_n = n - valid_n - test_n;

    let collect = |ids: &[&String]| ids.iter().map(|s| (*s).clone()).collect::<BTreeSet<_>>();
    Ok(vec![
        DatasetSplit {
            name: SplitName::Train,
            cve_ids: collect(&shuffled[..train_n]),
        },
        DatasetSplit {
            name: SplitName::Valid,
            cve_ids: collect(&shuffled[train_n..train_n + valid_n]),
        },
        DatasetSplit {
            name: SplitName::Test,
            cve_ids: collect(&shuffled[train_n + valid_n..]),
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("CVE-2024-{:04}", i + 1000)).collect()
    }

    #[test]
    fn sizes_follow_floor_rule() {
        let splits = split_dataset(&ids(10), SplitRatios::default(), 7).unwrap();
        assert_eq!(splits[0].cve_ids.len(), 8);
        assert_eq!(splits[1].cve_ids.len(), 1);
        assert_eq!(splits[2].cve_ids.len(), 1);
    }

    #[test]
    fn same_seed_same_assignment() {
        let a = split_dataset(&ids(50), SplitRatios::default(), 42).unwrap();
        let b = split_dataset(&ids(50), SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&ids(50), SplitRatios::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let bad = SplitRatios {
            train: 0.5,
            valid: 0.3,
            test: 0.3,
        };
        assert!(matches!(
            split_dataset(&ids(10), bad, 1),
            Err(CorpusError::InvalidRatios(..))
        ));
        assert!(matches!(
            split_dataset(&ids(2), SplitRatios::default(), 1),
            Err(CorpusError::TooFewIds(2))
        ));
        let mut dup = ids(5);
        dup[4] = dup[0].clone();
        assert!(matches!(
            split_dataset(&dup, SplitRatios::default(), 1),
            Err(CorpusError::DuplicateCveId(_))
        ));
    }

    proptest! {
        #[test]
        fn splits_partition_the_input(n in 3usize..200, seed in 0u64..1000) {
            let input = ids(n);
            let splits = split_dataset(&input, SplitRatios::default(), seed).unwrap();
            let mut union = BTreeSet::new();
            let mut total = 0;
            for s in &splits {
                total += s.cve_ids.len();
                union.extend(s.cve_ids.iter().cloned());
            }
            prop_assert_eq!(total, n);
            prop_assert_eq!(union.len(), n);
        }
    }
}
