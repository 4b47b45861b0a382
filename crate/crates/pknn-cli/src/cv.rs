//! Seeded k-fold splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{HarnessError, Result};

/// Shuffle `0..n` with the seeded generator, then cut it into `folds`
/// contiguous test blocks whose sizes differ by at most one (the first
/// `n % folds` folds get the extra element). Returns `(train, test)` index
/// pairs with both sides sorted ascending.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(HarnessError::Config(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if folds > n {
        return Err(HarnessError::Config(format!(
            "cannot split {n} observations into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = n / folds;
    let remainder = n % folds;
    let mut splits = Vec::with_capacity(folds);
    let mut start = 0;
    for fold in 0..folds {
        let size = base + usize::from(fold < remainder);
        let mut test: Vec<usize> = order[start..start + size].to_vec();
        let mut train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        test.sort_unstable();
        train.sort_unstable();
        splits.push((train, test));
        start += size;
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn four_folds_of_eight_are_disjoint_and_cover() {
        let splits = kfold_split(8, 4, 1).unwrap();
        assert_eq!(splits.len(), 4);
        let mut seen = BTreeSet::new();
        for (train, test) in &splits {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len(), 6);
            for &i in test {
                assert!(seen.insert(i), "index {i} in two test folds");
            }
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn remainder_goes_to_the_first_folds() {
        let splits = kfold_split(10, 4, 7).unwrap();
        let sizes: Vec<usize> = splits.iter().map(|(_, t)| t.len()).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
    }

    #[test]
    fn same_seed_same_split() {
        assert_eq!(kfold_split(20, 4, 5).unwrap(), kfold_split(20, 4, 5).unwrap());
        assert_ne!(kfold_split(20, 4, 5).unwrap(), kfold_split(20, 4, 6).unwrap());
    }

    #[test]
    fn too_many_folds_rejected() {
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(10, 1, 0).is_err());
    }

    #[test]
    fn train_and_test_partition_each_fold() {
        for (train, test) in kfold_split(11, 3, 2).unwrap() {
            let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
            assert_eq!(all.len(), 11);
            assert!(train.iter().all(|i| !test.contains(i)));
        }
    }
}
