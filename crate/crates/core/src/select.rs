//! Feature selection: ANOVA F-test, L1 one-vs-rest regression, forest
//! importance, and gradient-boosted importance.
//!
//! Every selector is fitted on training rows only and produces the full
//! per-column importance vector plus the top-`k` column indices. Ranking
//! is by descending importance with ascending index as the tie-break; the
//! selected indices themselves are reported in ascending order, ready to
//! slice a matrix with.

use serde::{Deserialize, Serialize};

use crate::classify::{ForestConfig, ForestModel};
use crate::error::{Error, Result};

/// Importance assigned to a column that alone separates the classes with
/// zero within-class variance (an infinite F statistic, made finite so
/// every importance stays representable).
pub const F_SCORE_CAP: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectorKind {
    /// Univariate ANOVA F-test, highest k scores.
    KBest,
    /// One-vs-rest L1-penalized linear regression; importance is the
    /// largest absolute coefficient across classes.
    Lasso,
    /// Mean Gini impurity decrease over a 250-tree forest.
    Forest,
    /// Total split gain over a gradient-boosted tree ensemble.
    Gbdt,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 4] = [
        SelectorKind::KBest,
        SelectorKind::Lasso,
        SelectorKind::Forest,
        SelectorKind::Gbdt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::KBest => "kbest",
            SelectorKind::Lasso => "lasso",
            SelectorKind::Forest => "forest",
            SelectorKind::Gbdt => "gbdt",
        }
    }

    pub fn parse(s: &str) -> Result<SelectorKind> {
        match s.to_ascii_lowercase().as_str() {
            "kbest" => Ok(SelectorKind::KBest),
            "lasso" => Ok(SelectorKind::Lasso),
            "forest" => Ok(SelectorKind::Forest),
            "gbdt" => Ok(SelectorKind::Gbdt),
            other => Err(Error::InvalidParam(format!(
                "unknown selector {other:?} (expected kbest, lasso, forest, or gbdt)"
            ))),
        }
    }
}

/// Outcome of one selector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorReport {
    pub method: SelectorKind,
    /// The requested k (kept for the record; `selected` holds min(k, D)
    /// indices when k exceeds the column count).
    pub k: usize,
    /// One finite importance per input column.
    pub importances: Vec<f64>,
    /// Top-min(k, D) column indices, ascending.
    pub selected: Vec<usize>,
}

impl SelectorReport {
    /// Keep only the selected columns of each row.
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        self.selected.iter().map(|&j| row[j]).collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

fn check_xy(x: &[Vec<f64>], y: &[u32], n_classes: usize) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Mismatch(format!("{} rows vs {} labels", x.len(), y.len())));
    }
    let width = x[0].len();
    if width == 0 || x.iter().any(|r| r.len() != width) {
        return Err(Error::Mismatch("ragged or empty rows".into()));
    }
    if n_classes < 2 || y.iter().any(|&l| l as usize >= n_classes) {
        return Err(Error::Mismatch("labels must cover at least two valid classes".into()));
    }
    Ok(width)
}

/// Column sum of squared deviations from the mean, with an all-equal
/// short-circuit so a constant group contributes exactly zero.
fn sum_sq_dev(values: &[f64]) -> (f64, f64) {
    if values.windows(2).all(|w| w[0] == w[1]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss)
}

/// One-way ANOVA F statistic per column.
fn anova_f(x: &[Vec<f64>], y: &[u32], n_classes: usize) -> Result<Vec<f64>> {
    let width = x[0].len();
    let n = x.len();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in y.iter().enumerate() {
        groups[label as usize].push(i);
    }
    let present = groups.iter().filter(|g| !g.is_empty()).count();
    if present < 2 {
        return Err(Error::Mismatch("F-test needs at least two classes present".into()));
    }
    if n <= present {
        return Err(Error::Mismatch("F-test needs more rows than classes".into()));
    }
    let df_between = (present - 1) as f64;
    let df_within = (n - present) as f64;
    let mut scores = Vec::with_capacity(width);
    for j in 0..width {
        let column: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let (grand_mean, _) = sum_sq_dev(&column);
        let mut ss_between = 0.0f64;
        let mut ss_within = 0.0f64;
        for group in &groups {
            if group.is_empty() {
                continue;
            }
            let values: Vec<f64> = group.iter().map(|&i| column[i]).collect();
            let (mean, ss) = sum_sq_dev(&values);
            ss_within += ss;
            ss_between += values.len() as f64 * (mean - grand_mean) * (mean - grand_mean);
        }
        let score = if ss_within == 0.0 {
            if ss_between > 0.0 {
                F_SCORE_CAP
            } else {
                0.0 // constant column
            }
        } else {
            ((ss_between / df_between) / (ss_within / df_within)).min(F_SCORE_CAP)
        };
        scores.push(score);
    }
    Ok(scores)
}

/// L1-penalized least squares by cyclic coordinate descent on centered
/// data, objective `(1/2n)‖y − Xw‖² + λ‖w‖₁`. Returns the coefficients.
fn lasso_coordinate_descent(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    max_sweeps: usize,
    tol: f64,
) -> Vec<f64> {
    let n = x.len();
    let width = x[0].len();
    let nf = n as f64;
    let mut col_means = vec![0.0f64; width];
    for row in x {
        for (m, &v) in col_means.iter_mut().zip(row) {
            *m += v / nf;
        }
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    // Centered design, column-major for the inner loop.
    let columns: Vec<Vec<f64>> = (0..width)
        .map(|j| x.iter().map(|r| r[j] - col_means[j]).collect())
        .collect();
    let col_sq: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<f64>() / nf)
        .collect();
    let mut weights = vec![0.0f64; width];
    let mut residual: Vec<f64> = y.iter().map(|&v| v - y_mean).collect();
    for _ in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..width {
            if col_sq[j] == 0.0 {
                continue; // constant column keeps weight 0
            }
            let w_old = weights[j];
            let rho = columns[j]
                .iter()
                .zip(&residual)
                .map(|(&c, &r)| c * (r + w_old * c))
                .sum::<f64>()
                / nf;
            let w_new = (rho.abs() - lambda).max(0.0) * rho.signum() / col_sq[j];
            if w_new != w_old {
                for (r, &c) in residual.iter_mut().zip(&columns[j]) {
                    *r -= (w_new - w_old) * c;
                }
                weights[j] = w_new;
                max_change = max_change.max((w_new - w_old).abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    weights
}

/// One-vs-rest lasso importance: the largest |coefficient| any class
/// assigns to the column.
fn lasso_importance(x: &[Vec<f64>], y: &[u32], n_classes: usize) -> Vec<f64> {
    let width = x[0].len();
    let mut importance = vec![0.0f64; width];
    for class in 0..n_classes {
        let targets: Vec<f64> = y
            .iter()
            .map(|&l| if l as usize == class { 1.0 } else { 0.0 })
            .collect();
        let coefs = lasso_coordinate_descent(x, &targets, 1e-3, 1000, 1e-6);
        for (imp, c) in importance.iter_mut().zip(&coefs) {
            *imp = imp.max(c.abs());
        }
    }
    importance
}

// ---- Gradient-boosted importance -----------------------------------------

/// Shallow regression tree used inside the boosting loop.
enum RegNode {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn eval(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                RegNode::Leaf(v) => return *v,
                RegNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct RegSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_reg_split(
    x: &[Vec<f64>],
    targets: &[f64],
    indices: &[usize],
    min_leaf: usize,
) -> Option<RegSplit> {
    let total_n = indices.len() as f64;
    let sum: f64 = indices.iter().map(|&i| targets[i]).sum();
    let sum_sq: f64 = indices.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_sse = sum_sq - sum * sum / total_n;
    let width = x[0].len();
    let mut best: Option<RegSplit> = None;
    for feature in 0..width {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| {
            x[a][feature].partial_cmp(&x[b][feature]).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut left_sum = 0.0f64;
        let mut left_sq = 0.0f64;
        for cut in 1..order.len() {
            let t = targets[order[cut - 1]];
            left_sum += t;
            left_sq += t * t;
            let (prev, next) = (x[order[cut - 1]][feature], x[order[cut]][feature]);
            if prev == next {
                continue;
            }
            if cut < min_leaf || order.len() - cut < min_leaf {
                continue;
            }
            let n_left = cut as f64;
            let n_right = total_n - n_left;
            let right_sum = sum - left_sum;
            let right_sq = sum_sq - left_sq;
            let sse_left = left_sq - left_sum * left_sum / n_left;
            let sse_right = right_sq - right_sum * right_sum / n_right;
            let gain = parent_sse - sse_left - sse_right;
            if gain <= 0.0 {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => gain > b.gain,
            };
            if better {
                best = Some(RegSplit { feature, threshold: 0.5 * (prev + next), gain });
            }
        }
    }
    best
}

/// Grow one regression tree on the residuals, assigning Newton-step leaf
/// values for the multiclass logistic loss and accumulating split gains
/// into `importance`.
#[allow(clippy::too_many_arguments)]
fn grow_reg_tree(
    x: &[Vec<f64>],
    residuals: &[f64],
    indices: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    n_classes: f64,
    nodes: &mut Vec<RegNode>,
    importance: &mut [f64],
) -> usize {
    let split = if depth < max_depth && indices.len() >= 2 * min_leaf {
        best_reg_split(x, residuals, indices, min_leaf)
    } else {
        None
    };
    match split {
        None => {
            // Friedman's multiclass Newton step:
            // γ = ((K−1)/K) · Σr / Σ|r|(1−|r|).
            let num: f64 = indices.iter().map(|&i| residuals[i]).sum();
            let den: f64 = indices
                .iter()
                .map(|&i| residuals[i].abs() * (1.0 - residuals[i].abs()))
                .sum();
            let value = if den > 1e-12 {
                (n_classes - 1.0) / n_classes * num / den
            } else {
                0.0
            };
            nodes.push(RegNode::Leaf(value));
            nodes.len() - 1
        }
        Some(s) => {
            importance[s.feature] += s.gain;
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in indices {
                if x[i][s.feature] <= s.threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            let id = nodes.len();
            nodes.push(RegNode::Split { feature: s.feature, threshold: s.threshold, left: 0, right: 0 });
            let left_id = grow_reg_tree(
                x, residuals, &left, depth + 1, max_depth, min_leaf, n_classes, nodes, importance,
            );
            let right_id = grow_reg_tree(
                x, residuals, &right, depth + 1, max_depth, min_leaf, n_classes, nodes, importance,
            );
            if let RegNode::Split { left, right, .. } = &mut nodes[id] {
                *left = left_id;
                *right = right_id;
            }
            id
        }
    }
}

struct GbdtFit {
    importance: Vec<f64>,
    /// Training multiclass log-loss after each boosting round; asserted on
    /// by tests (functional gradient descent must reduce it), unused by the
    /// selection path itself.
    #[allow(dead_code)]
    train_losses: Vec<f64>,
}

/// Gradient boosting for importance only: 100 rounds of K depth-3 trees on
/// softmax residuals, learning rate 0.1. Constant columns can never host a
/// split, so their importance is exactly zero.
fn gbdt_fit(x: &[Vec<f64>], y: &[u32], n_classes: usize) -> GbdtFit {
    const ROUNDS: usize = 100;
    const LEARNING_RATE: f64 = 0.1;
    const MAX_DEPTH: usize = 3;
    const MIN_LEAF: usize = 5;
    let n = x.len();
    let width = x[0].len();
    let kf = n_classes as f64;
    let mut scores = vec![vec![0.0f64; n_classes]; n];
    let mut importance = vec![0.0f64; width];
    let mut train_losses = Vec::with_capacity(ROUNDS);
    let indices: Vec<usize> = (0..n).collect();
    for _round in 0..ROUNDS {
        // Softmax probabilities from the current scores.
        let probs: Vec<Vec<f64>> = scores
            .iter()
            .map(|s| {
                let max = s.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let exps: Vec<f64> = s.iter().map(|&v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / sum).collect()
            })
            .collect();
        for class in 0..n_classes {
            let residuals: Vec<f64> = (0..n)
                .map(|i| {
                    let target = if y[i] as usize == class { 1.0 } else { 0.0 };
                    target - probs[i][class]
                })
                .collect();
            let mut nodes = Vec::new();
            grow_reg_tree(
                x,
                &residuals,
                &indices,
                0,
                MAX_DEPTH,
                MIN_LEAF,
                kf,
                &mut nodes,
                &mut importance,
            );
            let tree = RegTree { nodes };
            for (i, row) in x.iter().enumerate() {
                scores[i][class] += LEARNING_RATE * tree.eval(row);
            }
        }
        let loss = -(0..n)
            .map(|i| {
                let s = &scores[i];
                let max = s.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let log_sum = max + s.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                s[y[i] as usize] - log_sum
            })
            .sum::<f64>()
            / n as f64;
        train_losses.push(loss);
    }
    GbdtFit { importance, train_losses }
}

/// Rank columns by (importance desc, index asc) and return the top-k
/// indices in ascending order.
fn top_k(importances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| {
        importances[b]
            .partial_cmp(&importances[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order[..k].to_vec();
    selected.sort_unstable();
    selected
}

/// Fit one selector on training rows and pick the top `k` columns.
pub fn select_features(
    x: &[Vec<f64>],
    y: &[u32],
    n_classes: usize,
    kind: SelectorKind,
    k: usize,
    seed: u64,
) -> Result<SelectorReport> {
    let width = check_xy(x, y, n_classes)?;
    if k == 0 {
        return Err(Error::InvalidParam("cannot select zero columns".into()));
    }
    let importances = match kind {
        SelectorKind::KBest => anova_f(x, y, n_classes)?,
        SelectorKind::Lasso => lasso_importance(x, y, n_classes),
        SelectorKind::Forest => {
            let config = ForestConfig { n_trees: 250, ..ForestConfig::default() };
            ForestModel::fit_with_importance(x, y, n_classes, config, seed)?.1
        }
        SelectorKind::Gbdt => gbdt_fit(x, y, n_classes).importance,
    };
    if let Some(bad) = importances.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("selector produced non-finite importance {bad}")));
    }
    let selected = top_k(&importances, k.min(width));
    Ok(SelectorReport { method: kind, k, importances, selected })
}
