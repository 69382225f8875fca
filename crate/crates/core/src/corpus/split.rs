use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Result, Story};

pub const DEFAULT_EXCLUSIONS: [f64; 7] = [0.0, 5.0, 25.0, 50.0, 70.0, 90.0, 95.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Percentages of training stories to drop, each in `[0, 100)`.
    pub exclusions: Vec<f64>,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            exclusions: DEFAULT_EXCLUSIONS.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub exclusion: f64,
    pub train: Vec<Story>,
    pub test: Vec<Story>,
}

/// Number of stories kept out of `n` at exclusion `pct`.
pub fn retained(n: usize, pct: f64) -> usize {
    (((100.0 - pct) * n as f64) / 100.0).round().max(1.0) as usize
}

/// One shuffle under `spec.seed`; each split keeps a prefix of it, so
/// higher exclusions give subsets of lower ones. The test set is shared.
pub fn split_corpus(train: &[Story], test: &[Story], spec: &SplitSpec) -> Result<Vec<Split>> {
    if train.is_empty() {
        return Err(CorpusError::Argument("empty training pool".into()));
    }
    if let Some(p) = spec.exclusions.iter().find(|p| !(0.0..100.0).contains(*p)) {
        return Err(CorpusError::Argument(format!("exclusion {p} outside [0, 100)")));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    Ok(spec
        .exclusions
        .iter()
        .map(|&p| {
            let mut keep = order[..retained(train.len(), p)].to_vec();
            keep.sort_unstable();
            Split {
                exclusion: p,
                train: keep.into_iter().map(|i| train[i].clone()).collect(),
                test: test.to_vec(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;

    fn stories(n: usize) -> Vec<Story> {
        (0..n)
            .map(|i| Story {
                title: format!("s{i}"),
                agent_initiated: false,
                turns: vec![Turn::user("greet"), Turn::system(format!("a{i}"))],
            })
            .collect()
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(retained(65, 95.0), 3);
        assert_eq!(retained(65, 0.0), 65);
        assert_eq!(retained(3, 95.0), 1);
    }

    #[test]
    fn splits_are_nested_with_fixed_test_set() {
        let train = stories(65);
        let test = stories(15);
        let splits = split_corpus(&train, &test, &SplitSpec::default()).unwrap();
        assert_eq!(splits[0].train, train);
        assert_eq!(splits[6].train.len(), 3);
        for pair in splits.windows(2) {
            assert!(pair[1].train.iter().all(|s| pair[0].train.contains(s)));
            assert_eq!(pair[0].test, pair[1].test);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(split_corpus(&[], &[], &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            exclusions: vec![100.0],
            seed: 1,
        };
        assert!(split_corpus(&stories(4), &[], &bad).is_err());
    }
}
