//! Bootstrap-aggregated forest of Gini trees.
//!
//! Each tree gets an independent RNG stream derived from the master seed,
//! draws its own bootstrap sample, and subsamples features per split.
//! Trees are fitted in parallel but stored in index order, so the model is
//! identical at any thread count. Prediction is a majority vote with ties
//! going to the lowest class index.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::tree::{TreeConfig, TreeModel};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// How many features each split examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubsample {
    /// `max(1, ⌊√D⌋)` — the usual forest default.
    Sqrt,
    /// Every feature (turns each tree into a deterministic CART fit).
    All,
    /// A fixed count, clamped to the feature width.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    /// Draw an N-sample bootstrap per tree; `false` trains every tree on
    /// the full data (useful only for equivalence testing).
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 15,
            min_leaf: 5,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
        }
    }
}

/// A fitted voting forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    n_features: usize,
    n_classes: usize,
    trees: Vec<TreeModel>,
}

/// Majority vote with ties resolved toward the lowest class index.
pub fn majority_vote(votes: &[u32], n_classes: usize) -> u32 {
    let mut counts = vec![0u32; n_classes];
    for &v in votes {
        counts[v as usize] += 1;
    }
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

impl ForestModel {
    /// Fit the forest and return the normalized mean Gini importance
    /// (sums to 1; uniform when no split ever fired).
    pub fn fit_with_importance(
        x: &[Vec<f64>],
        y: &[u32],
        n_classes: usize,
        config: ForestConfig,
        seed: u64,
    ) -> Result<(ForestModel, Vec<f64>)> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Mismatch(format!("{} rows vs {} labels", x.len(), y.len())));
        }
        if config.n_trees == 0 {
            return Err(Error::InvalidParam("forest needs at least one tree".into()));
        }
        let width = x[0].len();
        let subsample = match config.feature_subsample {
            FeatureSubsample::Sqrt => Some(((width as f64).sqrt().floor() as usize).max(1)),
            FeatureSubsample::All => None,
            FeatureSubsample::Fixed(m) => {
                if m == 0 {
                    return Err(Error::InvalidParam("feature subsample of 0".into()));
                }
                Some(m.min(width))
            }
        };
        let tree_config = TreeConfig {
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            feature_subsample: subsample,
        };
        let fitted: Vec<(TreeModel, Vec<f64>)> = (0..config.n_trees)
            .into_par_iter()
            .map(|t| -> Result<(TreeModel, Vec<f64>)> {
                let mut rng = seeded_rng(seed, &format!("forest-tree-{t}"));
                if config.bootstrap {
                    let n = x.len();
                    let mut bx = Vec::with_capacity(n);
                    let mut by = Vec::with_capacity(n);
                    for _ in 0..n {
                        let i = rng.random_range(0..n);
                        bx.push(x[i].clone());
                        by.push(y[i]);
                    }
                    TreeModel::fit_with_importance(&bx, &by, n_classes, tree_config, &mut rng)
                } else {
                    TreeModel::fit_with_importance(x, y, n_classes, tree_config, &mut rng)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut importance = vec![0.0f64; width];
        let mut trees = Vec::with_capacity(fitted.len());
        for (tree, imp) in fitted {
            for (acc, v) in importance.iter_mut().zip(&imp) {
                *acc += v;
            }
            trees.push(tree);
        }
        let total: f64 = importance.iter().sum();
        if total > 0.0 {
            for v in &mut importance {
                *v /= total;
            }
        } else {
            importance = vec![1.0 / width as f64; width];
        }
        Ok((ForestModel { n_features: width, n_classes, trees }, importance))
    }

    pub fn fit(
        x: &[Vec<f64>],
        y: &[u32],
        n_classes: usize,
        config: ForestConfig,
        seed: u64,
    ) -> Result<ForestModel> {
        Ok(Self::fit_with_importance(x, y, n_classes, config, seed)?.0)
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Per-class vote tally for one row; sums to the tree count.
    pub fn vote_counts(&self, row: &[f64]) -> Result<Vec<u32>> {
        let mut counts = vec![0u32; self.n_classes];
        for tree in &self.trees {
            counts[tree.predict_row(row)? as usize] += 1;
        }
        Ok(counts)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<u32> {
        let counts = self.vote_counts(row)?;
        let mut best = 0usize;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        Ok(best as u32)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}
