use std::io::{Read, Write};

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree, DecisionTree, TreeConfig};
use crate::codec;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    /// Draw a same-size sample with replacement for each tree.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        RandomForestConfig {
            n_trees: 100,
            tree: TreeConfig::default(),
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

pub fn train_random_forest(dataset: &LabeledDataset, cfg: &RandomForestConfig) -> Result<RandomForest> {
    dataset.require_both_classes()?;
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    let n_features = dataset.n_cols();
    if let Some(f) = cfg.tree.features_per_split {
        if f == 0 || f > n_features {
            return Err(Error::InvalidArgument(format!(
                "features_per_split {f} outside [1, {n_features}]"
            )));
        }
    }
    let rows = dataset.matrix.view();
    let n = dataset.n_rows();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive_seed(cfg.seed, "tree", &t.to_string()));
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree(rows, &dataset.labels, &samples, &cfg.tree, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest { trees, n_features })
}

impl RandomForest {
    pub fn tree_probas(&self, row: ArrayView1<f64>) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(row)).collect()
    }

    /// Mean of the per-tree leaf probabilities.
    pub fn predict_proba(&self, matrix: ArrayView2<f64>) -> Vec<f64> {
        matrix
            .outer_iter()
            .map(|row| self.tree_probas(row).iter().sum::<f64>() / self.trees.len() as f64)
            .collect()
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        codec::write_u64(out, self.n_features as u64)?;
        codec::write_u64(out, self.trees.len() as u64)?;
        for tree in &self.trees {
            tree.write(out)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let n_features = codec::read_len(input)?;
        let n_trees = codec::read_len(input)?;
        let trees = (0..n_trees)
            .map(|_| DecisionTree::read(input))
            .collect::<Result<Vec<_>>>()?;
        if trees.is_empty() || trees.iter().any(|t| t.n_features != n_features) {
            return Err(Error::ModelFile("inconsistent forest".into()));
        }
        Ok(RandomForest { trees, n_features })
    }
}
