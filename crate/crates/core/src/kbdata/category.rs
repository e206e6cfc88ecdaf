use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TripleSet;
use crate::error::{Error, Result};

/// Cardinality category of a relationship.
///
/// `OneToMany` means one head is linked to many tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationCategory {
    #[serde(rename = "1-1")]
    OneToOne,
    #[serde(rename = "1-M")]
    OneToMany,
    #[serde(rename = "M-1")]
    ManyToOne,
    #[serde(rename = "M-M")]
    ManyToMany,
}

impl RelationCategory {
    pub const ALL: [RelationCategory; 4] = [
        RelationCategory::OneToOne,
        RelationCategory::OneToMany,
        RelationCategory::ManyToOne,
        RelationCategory::ManyToMany,
    ];

    const THRESHOLD: f64 = 1.5;

    fn from_averages(heads_per_tail: f64, tails_per_head: f64) -> Self {
        match (
            heads_per_tail < Self::THRESHOLD,
            tails_per_head < Self::THRESHOLD,
        ) {
            (true, true) => RelationCategory::OneToOne,
            (true, false) => RelationCategory::OneToMany,
            (false, true) => RelationCategory::ManyToOne,
            (false, false) => RelationCategory::ManyToMany,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationCategory::OneToOne => "1-1",
            RelationCategory::OneToMany => "1-M",
            RelationCategory::ManyToOne => "M-1",
            RelationCategory::ManyToMany => "M-M",
        }
    }
}

impl fmt::Display for RelationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Default)]
struct PairCounts {
    tails: HashSet<usize>,
    heads: HashSet<usize>,
    links: usize,
}

fn pair_counts(train: &TripleSet) -> HashMap<usize, PairCounts> {
    // Distinct (label, tail) and (label, head) pairs with distinct partners.
    // Truth-labelled sets contribute their positives only.
    let positives = if train.has_truth() {
        Some(train.positives())
    } else {
        None
    };
    let set = positives.as_ref().unwrap_or(train);
    let mut seen = HashSet::new();
    let mut by_rel: HashMap<usize, PairCounts> = HashMap::new();
    for &t in set.triples() {
        if !seen.insert(t) {
            continue;
        }
        let c = by_rel.entry(t.label).or_default();
        c.tails.insert(t.tail);
        c.heads.insert(t.head);
        c.links += 1;
    }
    by_rel
}

fn category_of(c: &PairCounts) -> RelationCategory {
    // Each distinct triple contributes one distinct head to its (label, tail)
    // pair and one distinct tail to its (label, head) pair.
    let heads_per_tail = c.links as f64 / c.tails.len() as f64;
    let tails_per_head = c.links as f64 / c.heads.len() as f64;
    RelationCategory::from_averages(heads_per_tail, tails_per_head)
}

/// Categorizes every relation that occurs in `train`.
pub fn classify_relations(train: &TripleSet) -> BTreeMap<usize, RelationCategory> {
    pair_counts(train)
        .iter()
        .map(|(&l, c)| (l, category_of(c)))
        .collect()
}

/// Categorizes a single relation; it must occur in `train`.
pub fn classify_relation(train: &TripleSet, label: usize) -> Result<RelationCategory> {
    pair_counts(train)
        .get(&label)
        .map(category_of)
        .ok_or_else(|| {
            Error::domain(format!(
                "relation {label} does not occur in the training set"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbdata::Triple;
    use proptest::prelude::*;

    fn t(h: usize, l: usize, t: usize) -> Triple {
        Triple::new(h, l, t)
    }

    #[test]
    fn bijection_is_one_to_one() {
        let set = TripleSet::new(vec![t(0, 0, 1), t(1, 0, 2), t(2, 0, 0)]);
        assert_eq!(
            classify_relation(&set, 0).unwrap(),
            RelationCategory::OneToOne
        );
    }

    #[test]
    fn one_head_many_tails() {
        let set = TripleSet::new(vec![t(0, 0, 1), t(0, 0, 2), t(0, 0, 3)]);
        assert_eq!(
            classify_relation(&set, 0).unwrap(),
            RelationCategory::OneToMany
        );
        let rev = TripleSet::new(vec![t(1, 0, 0), t(2, 0, 0), t(3, 0, 0)]);
        assert_eq!(
            classify_relation(&rev, 0).unwrap(),
            RelationCategory::ManyToOne
        );
    }

    #[test]
    fn complete_bipartite_is_many_to_many() {
        let mut v = Vec::new();
        for h in 0..3 {
            for tl in 3..6 {
                v.push(t(h, 2, tl));
            }
        }
        let set = TripleSet::new(v);
        assert_eq!(
            classify_relation(&set, 2).unwrap(),
            RelationCategory::ManyToMany
        );
        assert!(classify_relation(&set, 0).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        // two tails for one head out of two heads: 3 links / 2 heads = 1.5 -> M
        let set = TripleSet::new(vec![t(0, 0, 1), t(0, 0, 2), t(3, 0, 4)]);
        assert_eq!(
            classify_relation(&set, 0).unwrap(),
            RelationCategory::OneToMany
        );
    }

    #[test]
    fn truth_labelled_sets_use_positives() {
        let set = TripleSet::with_truth(
            vec![t(0, 0, 1), t(0, 0, 2), t(0, 0, 3), t(1, 0, 1)],
            vec![true, false, false, true],
        )
        .unwrap();
        assert_eq!(
            classify_relation(&set, 0).unwrap(),
            RelationCategory::ManyToOne
        );
    }

    proptest! {
        #[test]
        fn invariant_under_permutation(
            raw in proptest::collection::vec((0usize..6, 0usize..3, 0usize..6), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let triples: Vec<Triple> = raw.into_iter().map(|(h, l, tl)| t(h, l, tl)).collect();
            let mut shuffled = triples.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(
                classify_relations(&TripleSet::new(triples)),
                classify_relations(&TripleSet::new(shuffled))
            );
        }
    }
}
