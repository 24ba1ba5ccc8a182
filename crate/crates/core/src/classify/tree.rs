//! CART-style decision tree with Gini impurity.
//!
//! Splits are placed at midpoints between consecutive distinct feature
//! values; among equally good splits the lowest feature index and then the
//! lowest threshold wins, so fitting is fully deterministic. The same
//! builder serves the standalone tree classifier, the voting forest, and
//! the forest-based feature selector (which reads the accumulated Gini
//! importance).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tree growth limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Maximum split depth (a tree of depth 0 is a single leaf).
    pub max_depth: usize,
    /// Minimum samples in each child of a split.
    pub min_leaf: usize,
    /// Features examined per split: `None` means all, `Some(m)` draws m
    /// distinct feature indices from the node RNG.
    pub feature_subsample: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 15, min_leaf: 5, feature_subsample: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: u32 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A fitted classification tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    n_features: usize,
    n_classes: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

fn majority(counts: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u32],
    n_classes: usize,
    config: TreeConfig,
    nodes: Vec<Node>,
    /// Total Gini decrease attributed to each feature, weighted by the
    /// fraction of root samples reaching the split.
    importance: Vec<f64>,
    n_root: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn class_counts(&self, indices: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0f64; self.n_classes];
        for &i in indices {
            counts[self.y[i] as usize] += 1.0;
        }
        counts
    }

    /// Candidate features for one split, honoring the subsample setting.
    fn split_features(&self, rng: &mut impl Rng) -> Vec<usize> {
        let width = self.x[0].len();
        match self.config.feature_subsample {
            None => (0..width).collect(),
            Some(m) => {
                // Draw m distinct indices, then sort so the lowest-index
                // tie-break is independent of draw order.
                let m = m.min(width);
                let mut pool: Vec<usize> = (0..width).collect();
                for i in 0..m {
                    let j = rng.random_range(i..pool.len());
                    pool.swap(i, j);
                }
                let mut picked = pool[..m].to_vec();
                picked.sort_unstable();
                picked
            }
        }
    }

    fn best_split(&self, indices: &[usize], rng: &mut impl Rng) -> Option<BestSplit> {
        let total = indices.len() as f64;
        let parent_counts = self.class_counts(indices);
        let parent_gini = gini(&parent_counts, total);
        let mut best: Option<BestSplit> = None;
        for feature in self.split_features(rng) {
            let mut order: Vec<usize> = indices.to_vec();
            order.sort_by(|&a, &b| {
                self.x[a][feature]
                    .partial_cmp(&self.x[b][feature])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut left_counts = vec![0.0f64; self.n_classes];
            let mut right_counts = parent_counts.clone();
            for cut in 1..order.len() {
                let moved = order[cut - 1];
                left_counts[self.y[moved] as usize] += 1.0;
                right_counts[self.y[moved] as usize] -= 1.0;
                let (prev, next) = (self.x[order[cut - 1]][feature], self.x[order[cut]][feature]);
                if prev == next {
                    continue; // no boundary between identical values
                }
                let n_left = cut as f64;
                let n_right = total - n_left;
                if (n_left as usize) < self.config.min_leaf
                    || (n_right as usize) < self.config.min_leaf
                {
                    continue;
                }
                let child_gini = (n_left / total) * gini(&left_counts, n_left)
                    + (n_right / total) * gini(&right_counts, n_right);
                let gain = parent_gini - child_gini;
                // Zero-gain splits stay eligible: parity-style labelings
                // (XOR) have no single split with immediate gain, yet the
                // children become separable. Depth and min_leaf bound the
                // recursion, so this cannot loop.
                if gain < 0.0 {
                    continue;
                }
                let threshold = 0.5 * (prev + next);
                let better = match &best {
                    None => true,
                    // Strictly larger gain wins; the candidate loop visits
                    // features ascending and thresholds ascending, so ties
                    // keep the earliest (lowest feature, lowest threshold).
                    Some(b) => gain > b.gain,
                };
                if better {
                    best = Some(BestSplit { feature, threshold, gain });
                }
            }
        }
        best
    }

    fn grow(&mut self, indices: &[usize], depth: usize, rng: &mut impl Rng) -> usize {
        let counts = self.class_counts(indices);
        let total = indices.len() as f64;
        let is_pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let can_split = depth < self.config.max_depth
            && indices.len() >= 2 * self.config.min_leaf
            && !is_pure;
        let split = if can_split { self.best_split(indices, rng) } else { None };
        match split {
            None => {
                self.nodes.push(Node::Leaf { class: majority(&counts) });
                self.nodes.len() - 1
            }
            Some(s) => {
                self.importance[s.feature] += (total / self.n_root) * s.gain;
                let (mut left, mut right) = (Vec::new(), Vec::new());
                for &i in indices {
                    if self.x[i][s.feature] <= s.threshold {
                        left.push(i);
                    } else {
                        right.push(i);
                    }
                }
                let id = self.nodes.len();
                self.nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: 0,
                    right: 0,
                });
                let left_id = self.grow(&left, depth + 1, rng);
                let right_id = self.grow(&right, depth + 1, rng);
                if let Node::Split { left, right, .. } = &mut self.nodes[id] {
                    *left = left_id;
                    *right = right_id;
                }
                id
            }
        }
    }
}

impl TreeModel {
    /// Fit a tree on the given rows. Returns the model and the per-feature
    /// Gini importance (total impurity decrease, weighted by node size).
    ///
    /// `rng` is consumed only when `feature_subsample` is active; a fit
    /// with all features never touches it.
    pub fn fit_with_importance(
        x: &[Vec<f64>],
        y: &[u32],
        n_classes: usize,
        config: TreeConfig,
        rng: &mut impl Rng,
    ) -> Result<(TreeModel, Vec<f64>)> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Mismatch(format!(
                "{} rows vs {} labels",
                x.len(),
                y.len()
            )));
        }
        let width = x[0].len();
        if width == 0 || x.iter().any(|r| r.len() != width) {
            return Err(Error::Mismatch("ragged or empty rows".into()));
        }
        if n_classes == 0 || y.iter().any(|&l| l as usize >= n_classes) {
            return Err(Error::Mismatch("label outside class range".into()));
        }
        if config.min_leaf == 0 {
            return Err(Error::InvalidParam("min_leaf must be at least 1".into()));
        }
        let mut builder = Builder {
            x,
            y,
            n_classes,
            config,
            nodes: Vec::new(),
            importance: vec![0.0; width],
            n_root: x.len() as f64,
        };
        let indices: Vec<usize> = (0..x.len()).collect();
        builder.grow(&indices, 0, rng);
        Ok((
            TreeModel { n_features: width, n_classes, nodes: builder.nodes },
            builder.importance,
        ))
    }

    /// Fit with default determinism (no feature subsampling).
    pub fn fit(x: &[Vec<f64>], y: &[u32], n_classes: usize, config: TreeConfig) -> Result<TreeModel> {
        let mut rng = crate::rng::seeded_rng(0, "tree-unused");
        Ok(Self::fit_with_importance(x, y, n_classes, config, &mut rng)?.0)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Number of nodes (splits + leaves).
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<u32> {
        if row.len() != self.n_features {
            return Err(Error::Mismatch(format!(
                "row width {} does not match tree width {}",
                row.len(),
                self.n_features
            )));
        }
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Leaf { class } => return Ok(*class),
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}
