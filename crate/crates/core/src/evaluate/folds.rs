use rand::seq::SliceRandom;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::seed;

/// Assignment of every row to one of `k` folds. Fold `i` is the test block
/// of rotation `i`; the remaining folds train.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle, then contiguous blocks; the first `n % k` folds get one extra row.
pub fn kfold_split(n_rows: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n_rows < k {
        return Err(Error::TooFewRows {
            rows: n_rows,
            folds: k,
        });
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut seed::rng(seed));
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut assignment = vec![0; n_rows];
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &row in &order[start..start + size] {
            assignment[row] = fold;
        }
        start += size;
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed,
    })
}

/// Stratified variant: shuffled rows are grouped by class, then dealt round-robin.
pub fn kfold_split_stratified(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    let n_rows = labels.len();
    if k < 2 || n_rows < k {
        return Err(Error::TooFewRows {
            rows: n_rows,
            folds: k,
        });
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut seed::rng(seed));
    order.sort_by_key(|&i| labels[i]);
    let mut assignment = vec![0; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed,
    })
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nine_rows_three_folds() {
        assert_eq!(kfold_split(9, 3, 1).unwrap().fold_sizes(), vec![3, 3, 3]);
    }

    #[test]
    fn ten_rows_three_folds() {
        let mut sizes = kfold_split(10, 3, 1).unwrap().fold_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn seeded_assignment_is_reproducible() {
        assert_eq!(kfold_split(50, 3, 7).unwrap(), kfold_split(50, 3, 7).unwrap());
        assert_ne!(kfold_split(50, 3, 7).unwrap(), kfold_split(50, 3, 8).unwrap());
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(kfold_split(2, 3, 0), Err(Error::TooFewRows { rows: 2, folds: 3 })));
    }

    #[test]
    fn stratified_keeps_class_ratio() {
        let labels: Vec<Label> = (0..30).map(|i| if i < 10 { Label::Benign } else { Label::Malware }).collect();
        let plan = kfold_split_stratified(&labels, 3, 4).unwrap();
        for fold in 0..3 {
            let benign = plan.test_indices(fold).iter().filter(|&&i| labels[i] == Label::Benign).count();
            assert!((3..=4).contains(&benign));
        }
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 3usize..200, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let plan = kfold_split(n, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            for f in 0..k {
                let mut all = plan.train_indices(f);
                all.extend(plan.test_indices(f));
                all.sort();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
