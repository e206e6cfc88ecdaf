use rand::seq::SliceRandom;
use rand::Rng;

use super::{Triple, TripleSet};
use crate::error::{Error, Result};

/// Every `(head, label, tail)` cell of an `E x L x E` tensor, labelled true
/// iff it is one of `positives`. Cells are enumerated head-major, then label,
/// then tail.
pub fn closed_world_tensor(
    positives: &TripleSet,
    num_entities: usize,
    num_relations: usize,
) -> TripleSet {
    let n = num_entities * num_relations * num_entities;
    let mut triples = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for h in 0..num_entities {
        for l in 0..num_relations {
            for t in 0..num_entities {
                let tr = Triple::new(h, l, t);
                truth.push(positives.contains(&tr));
                triples.push(tr);
            }
        }
    }
    TripleSet::with_truth(triples, truth).expect("lengths agree")
}

/// Seeded assignment of `n` items to `k` folds of near-equal size.
pub fn kfold_assignment<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos * k / n.max(1);
    }
    fold
}

/// One cross-validation round: fold `f` is test, fold `f + 1 (mod k)` is
/// validation and the remaining `k - 2` folds are training.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: TripleSet,
    pub valid: TripleSet,
    pub test: TripleSet,
}

impl FoldSplit {
    pub fn new(all: &TripleSet, assignment: &[usize], k: usize, fold: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::domain(format!("need at least 3 folds, got {k}")));
        }
        if fold >= k {
            return Err(Error::domain(format!(
                "fold {fold} out of range for {k} folds"
            )));
        }
        if assignment.len() != all.len() {
            return Err(Error::domain(format!(
                "fold assignment has {} entries for {} triples",
                assignment.len(),
                all.len()
            )));
        }
        let valid_fold = (fold + 1) % k;
        let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &f) in assignment.iter().enumerate() {
            if f >= k {
                return Err(Error::domain(format!(
                    "fold id {f} at position {i} exceeds {k}"
                )));
            }
            if f == fold {
                te.push(i);
            } else if f == valid_fold {
                va.push(i);
            } else {
                tr.push(i);
            }
        }
        Ok(FoldSplit {
            fold,
            train: all.select(&tr),
            valid: all.select(&va),
            test: all.select(&te),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tensor_covers_every_cell() {
        let pos = TripleSet::new(vec![Triple::new(0, 1, 2), Triple::new(2, 0, 0)]);
        let all = closed_world_tensor(&pos, 3, 2);
        assert_eq!(all.len(), 18);
        assert_eq!(all.positives().len(), 2);
        assert_eq!(all.triples()[0], Triple::new(0, 0, 0));
        assert_eq!(all.triples()[17], Triple::new(2, 1, 2));
    }

    #[test]
    fn folds_partition_and_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = kfold_assignment(103, 10, &mut rng);
        let mut sizes = [0usize; 10];
        for &f in &a {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 10 || s == 11), "{sizes:?}");

        let pos = TripleSet::new(vec![Triple::new(0, 0, 1)]);
        let all = closed_world_tensor(&pos, 5, 4);
        let a = kfold_assignment(all.len(), 10, &mut rng);
        let split = FoldSplit::new(&all, &a, 10, 9).unwrap();
        assert_eq!(
            split.train.len() + split.valid.len() + split.test.len(),
            100
        );
        assert_eq!(split.valid.len(), 10);
        assert!(split.train.has_truth() && split.test.has_truth());
        assert!(FoldSplit::new(&all, &a, 10, 10).is_err());
    }
}
