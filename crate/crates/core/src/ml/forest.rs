use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{DecisionTree, TreeParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            min_leaf: 1,
            max_depth: None,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self, d: usize) -> TreeParams {
        let m = self.max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            max_features: Some(m.clamp(1, d.max(1))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

/// Bootstrap sample (with replacement, size `n`) used for tree `tree`.
pub fn bootstrap_indices(seed_value: u64, tree: usize, n: usize) -> Vec<usize> {
    let mut rng = seed::derived_rng(seed_value, &[seed::stream::TRAINING, 1, tree as u64]);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

impl RandomForest {
    /// Trees are grown in parallel; each has its own bootstrap and feature
    /// stream so the result does not depend on scheduling.
    pub fn fit(x: &[Vec<f64>], y: &[u8], params: &ForestParams, seed_value: u64) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let tp = params.tree_params(d);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let idx = bootstrap_indices(seed_value, t, y.len());
                let mut rng = seed::derived_rng(seed_value, &[seed::stream::TRAINING, 2, t as u64]);
                DecisionTree::grow(x, y, &idx, &tp, &mut rng)
            })
            .collect();
        RandomForest { n_features: d, trees }
    }

    pub fn secure_votes(&self, row: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict(row) == 1).count()
    }

    /// Majority vote, ties to insecure.
    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(2 * self.secure_votes(row) > self.trees.len())
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.secure_votes(row) as f64 / self.trees.len().max(1) as f64
    }
}
