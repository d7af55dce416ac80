//! Bootstrap random forests and Gini (mean decrease in impurity) importance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{argmax, check_xy, fit_tree_on, DecisionTree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    seed: u64,
    importances: Vec<f64>,
}

/// RNG stream for tree `index`; independent of how trees are scheduled.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64))
}

/// Fit `n_trees` trees on bootstrap resamples. Unless `params` fixes it, each
/// split considers `floor(sqrt(m))` features (at least one).
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    n_trees: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<RandomForest> {
    if n_trees == 0 {
        return Err(Error::arg("a forest needs at least one tree"));
    }
    let m = check_xy(x, y, n_classes)?;
    let params = TreeParams {
        n_features_per_split: Some(
            params
                .n_features_per_split
                .unwrap_or(((m as f64).sqrt().floor() as usize).max(1)),
        ),
        ..*params
    };
    let n = x.len();
    let trees: Vec<DecisionTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_tree_on(x, y, n_classes, sample, &params, &mut rng)
        })
        .collect();

    let mut importances = vec![0.0; m];
    for tree in &trees {
        for (acc, v) in importances.iter_mut().zip(tree.feature_importances()) {
            *acc += v;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        importances = vec![1.0 / m as f64; m];
    }
    Ok(RandomForest {
        trees,
        seed,
        importances,
    })
}

impl RandomForest {
    /// Normalized importances: non-negative, summing to one.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let k = self.trees[0].n_classes();
        let mut acc = vec![0.0; k];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(row)) {
                *a += p;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.trees.len() as f64);
        acc
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba(row))
    }
}

/// Keep features whose importance strictly exceeds `threshold`. When none
/// does, keep only the most important one (lowest index on ties).
pub fn select_mask(importances: &[f64], threshold: f64) -> Vec<bool> {
    let mut mask: Vec<bool> = importances.iter().map(|&v| v > threshold).collect();
    if !mask.iter().any(|&k| k) && !importances.is_empty() {
        mask[argmax(importances)] = true;
    }
    mask
}
