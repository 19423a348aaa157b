use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Paragraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Train => "train",
            Side::Test => "test",
        })
    }
}

/// Policy-level train/test partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train_policy_ids: BTreeSet<String>,
    pub test_policy_ids: BTreeSet<String>,
}

impl Split {
    pub fn side_of(&self, policy_id: &str) -> Option<Side> {
        if self.train_policy_ids.contains(policy_id) {
            Some(Side::Train)
        } else if self.test_policy_ids.contains(policy_id) {
            Some(Side::Test)
        } else {
            None
        }
    }

    /// Paragraphs whose policy falls on `side`, in input order.
    pub fn select<'a>(&self, paragraphs: &'a [Paragraph], side: Side) -> Vec<&'a Paragraph> {
        paragraphs
            .iter()
            .filter(|p| self.side_of(&p.policy_id) == Some(side))
            .collect()
    }

    fn check_partition(&self, policies: &BTreeSet<String>) -> Result<(), CorpusError> {
        if let Some(both) = self.train_policy_ids.intersection(&self.test_policy_ids).next() {
            return Err(CorpusError::InvalidSplit(format!("policy `{both}` is on both sides")));
        }
        let listed: BTreeSet<String> = self.train_policy_ids.union(&self.test_policy_ids).cloned().collect();
        if let Some(extra) = listed.difference(policies).next() {
            return Err(CorpusError::InvalidSplit(format!(
                "policy `{extra}` is not in the corpus"
            )));
        }
        if let Some(missing) = policies.difference(&listed).next() {
            return Err(CorpusError::InvalidSplit(format!(
                "policy `{missing}` is not assigned to a side"
            )));
        }
        Ok(())
    }
}

pub(crate) fn policy_ids(paragraphs: &[Paragraph]) -> BTreeSet<String> {
    paragraphs.iter().map(|p| p.policy_id.clone()).collect()
}

/// Seeded random policy-level split.
pub fn split_by_policy(
    paragraphs: &[Paragraph],
    seed: u64,
    train_policies: usize,
    test_policies: usize,
) -> Result<Split, CorpusError> {
    let ids = policy_ids(paragraphs);
    if train_policies + test_policies != ids.len() {
        return Err(CorpusError::BadCounts {
            train: train_policies,
            test: test_policies,
            policies: ids.len(),
        });
    }
    let mut order: Vec<String> = ids.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(train_policies);
    Ok(Split {
        train_policy_ids: order.into_iter().collect(),
        test_policy_ids: test.into_iter().collect(),
    })
}

/// Split from explicit policy-id lists; they must partition the corpus.
pub fn split_from_lists(
    paragraphs: &[Paragraph],
    train: impl IntoIterator<Item = String>,
    test: impl IntoIterator<Item = String>,
) -> Result<Split, CorpusError> {
    let split = Split {
        train_policy_ids: train.into_iter().collect(),
        test_policy_ids: test.into_iter().collect(),
    };
    split.check_partition(&policy_ids(paragraphs))?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(n: usize) -> Vec<Paragraph> {
        (0..n)
            .flat_map(|i| {
                (0..2).map(move |j| Paragraph {
                    policy_id: format!("p{i}"),
                    paragraph_id: format!("p{i}_{j:04}"),
                    text: "text".into(),
                    annotations: vec![],
                })
            })
            .collect()
    }

    #[test]
    fn counts_must_cover_policies() {
        let c = corpus(115);
        let s = split_by_policy(&c, 7, 90, 25).unwrap();
        assert_eq!((s.train_policy_ids.len(), s.test_policy_ids.len()), (90, 25));
        let err = split_by_policy(&c, 7, 115, 1).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::BadCounts {
                train: 115,
                test: 1,
                policies: 115
            }
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let c = corpus(20);
        assert_eq!(
            split_by_policy(&c, 3, 15, 5).unwrap(),
            split_by_policy(&c, 3, 15, 5).unwrap()
        );
        assert_ne!(
            split_by_policy(&c, 3, 15, 5).unwrap(),
            split_by_policy(&c, 4, 15, 5).unwrap()
        );
    }

    #[test]
    fn explicit_lists_are_validated() {
        let c = corpus(3);
        let ok = split_from_lists(&c, ["p0".into(), "p1".into()], ["p2".into()]).unwrap();
        assert_eq!(ok.side_of("p2"), Some(Side::Test));
        assert_eq!(ok.select(&c, Side::Train).len(), 4);
        for (train, test) in [
            (vec!["p0", "p1"], vec!["p1", "p2"]),
            (vec!["p0", "p1"], vec!["p9", "p2"]),
            (vec!["p0"], vec!["p2"]),
        ] {
            let err = split_from_lists(
                &c,
                train.into_iter().map(String::from),
                test.into_iter().map(String::from),
            )
            .unwrap_err();
            assert!(matches!(err, CorpusError::InvalidSplit(_)));
        }
    }

    proptest! {
        #[test]
        fn partitions_for_all_seeds(seed in any::<u64>(), n in 1usize..40, frac in 0.0f64..=1.0) {
            let c = corpus(n);
            let train = ((n as f64) * frac).round() as usize;
            let s = split_by_policy(&c, seed, train, n - train).unwrap();
            prop_assert!(s.train_policy_ids.is_disjoint(&s.test_policy_ids));
            prop_assert_eq!(s.train_policy_ids.len() + s.test_policy_ids.len(), n);
            prop_assert!(s.check_partition(&policy_ids(&c)).is_ok());
        }
    }
}
