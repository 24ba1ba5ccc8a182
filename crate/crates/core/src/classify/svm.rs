//! One-vs-rest RBF support-vector machine trained by simplified SMO.
//!
//! Rows are z-scored inside the model (train statistics only; a constant
//! column maps to 0). Each class gets a binary ±1 problem solved over a
//! precomputed f32 kernel matrix; the partner index in each SMO step is
//! drawn from a per-class seeded stream, and a sweep that changes no
//! multiplier ends the optimization (with a hard cap of `10·N` sweeps so
//! termination never depends on luck).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Box constraint.
    pub c: f64,
    /// RBF width: `K(a,b) = exp(−γ‖a−b‖²)`.
    pub gamma: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Smallest multiplier step that counts as a change.
    pub min_step: f64,
    /// Hard sweep cap as a multiple of the sample count.
    pub sweep_cap_factor: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, gamma: 0.1, tol: 1e-3, min_step: 1e-5, sweep_cap_factor: 10 }
    }
}

/// Per-column z-score parameters fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let width = rows[0].len();
        let n = rows.len() as f64;
        let mut means = vec![0.0f64; width];
        for row in rows {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0f64; width];
        for row in rows {
            for (s, (&v, &m)) in stds.iter_mut().zip(row.iter().zip(&means)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
        }
        Standardizer { means, stds }
    }

    /// Z-score; constant columns map to 0.
    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.stds[j] > 0.0 {
                    (v - self.means[j]) / self.stds[j]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// One binary one-vs-rest problem's solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BinarySolution {
    /// `(support-vector index, α·t)` pairs, index into the shared SV list.
    coefs: Vec<(usize, f64)>,
    bias: f64,
}

/// The structured half of a packed SVM: everything except the dense
/// standardizer and support-vector float blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmPack {
    pub config: SvmConfig,
    pub n_classes: usize,
    pub width: usize,
    pub n_support: usize,
    solutions: Vec<BinarySolution>,
}

/// A fitted one-vs-rest RBF SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    config: SvmConfig,
    standardizer: Standardizer,
    n_classes: usize,
    /// Standardized support vectors shared by all binary problems.
    support_vectors: Vec<Vec<f64>>,
    solutions: Vec<BinarySolution>,
}

/// Raw per-class result before support-vector compaction.
struct RawSolution {
    alphas: Vec<f64>,
    targets: Vec<f64>,
    bias: f64,
}

/// Simplified SMO on a precomputed kernel.
fn smo_binary(
    kernel: &[f32],
    n: usize,
    targets: &[f64],
    config: &SvmConfig,
    rng: &mut impl Rng,
) -> RawSolution {
    let k = |i: usize, j: usize| kernel[i * n + j] as f64;
    let mut alphas = vec![0.0f64; n];
    let mut bias = 0.0f64;
    let decision = |alphas: &[f64], bias: f64, i: usize| -> f64 {
        let mut f = bias;
        for j in 0..n {
            if alphas[j] > 0.0 {
                f += alphas[j] * targets[j] * k(i, j);
            }
        }
        f
    };
    let sweep_cap = config.sweep_cap_factor * n;
    for _sweep in 0..sweep_cap {
        let mut changed = 0usize;
        for i in 0..n {
            let e_i = decision(&alphas, bias, i) - targets[i];
            let r = targets[i] * e_i;
            if !((r < -config.tol && alphas[i] < config.c)
                || (r > config.tol && alphas[i] > 0.0))
            {
                continue;
            }
            // Seeded partner choice, j ≠ i.
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = decision(&alphas, bias, j) - targets[j];
            let (ai_old, aj_old) = (alphas[i], alphas[j]);
            let (lo, hi) = if targets[i] == targets[j] {
                ((ai_old + aj_old - config.c).max(0.0), (ai_old + aj_old).min(config.c))
            } else {
                ((aj_old - ai_old).max(0.0), (config.c + aj_old - ai_old).min(config.c))
            };
            if lo >= hi {
                continue;
            }
            let eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
            if eta >= 0.0 {
                continue;
            }
            let mut aj = aj_old - targets[j] * (e_i - e_j) / eta;
            aj = aj.clamp(lo, hi);
            if (aj - aj_old).abs() < config.min_step {
                continue;
            }
            let ai = ai_old + targets[i] * targets[j] * (aj_old - aj);
            alphas[i] = ai;
            alphas[j] = aj;
            let b1 = bias - e_i
                - targets[i] * (ai - ai_old) * k(i, i)
                - targets[j] * (aj - aj_old) * k(i, j);
            let b2 = bias - e_j
                - targets[i] * (ai - ai_old) * k(i, j)
                - targets[j] * (aj - aj_old) * k(j, j);
            bias = if 0.0 < ai && ai < config.c {
                b1
            } else if 0.0 < aj && aj < config.c {
                b2
            } else {
                0.5 * (b1 + b2)
            };
            changed += 1;
        }
        if changed == 0 {
            break;
        }
    }
    RawSolution { alphas, targets: targets.to_vec(), bias }
}

impl SvmModel {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u32],
        n_classes: usize,
        config: SvmConfig,
        seed: u64,
    ) -> Result<SvmModel> {
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
        if config.c <= 0.0 || config.gamma <= 0.0 || config.tol <= 0.0 {
            return Err(Error::InvalidParam("c, gamma, and tol must be positive".into()));
        }
        let standardizer = Standardizer::fit(x);
        let rows: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
        let n = rows.len();

        // Precompute the kernel once (f32 storage) and share it across all
        // one-vs-rest problems.
        let mut kernel = vec![0.0f32; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rbf(&rows[i], &rows[j], config.gamma) as f32;
                kernel[i * n + j] = v;
                kernel[j * n + i] = v;
            }
        }

        let raw: Vec<RawSolution> = (0..n_classes)
            .map(|class| {
                let targets: Vec<f64> = y
                    .iter()
                    .map(|&l| if l as usize == class { 1.0 } else { -1.0 })
                    .collect();
                let mut rng = seeded_rng(seed, &format!("svm-class-{class}"));
                smo_binary(&kernel, n, &targets, &config, &mut rng)
            })
            .collect();

        // Compact: keep only rows that support at least one class.
        let mut is_sv = vec![false; n];
        for solution in &raw {
            for (i, &a) in solution.alphas.iter().enumerate() {
                if a > 0.0 {
                    is_sv[i] = true;
                }
            }
        }
        let sv_indices: Vec<usize> = (0..n).filter(|&i| is_sv[i]).collect();
        let mut position = vec![usize::MAX; n];
        for (pos, &i) in sv_indices.iter().enumerate() {
            position[i] = pos;
        }
        let support_vectors: Vec<Vec<f64>> =
            sv_indices.iter().map(|&i| rows[i].clone()).collect();
        let solutions = raw
            .into_iter()
            .map(|r| BinarySolution {
                coefs: r
                    .alphas
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a > 0.0)
                    .map(|(i, &a)| (position[i], a * r.targets[i]))
                    .collect(),
                bias: r.bias,
            })
            .collect();
        Ok(SvmModel { config, standardizer, n_classes, support_vectors, solutions })
    }

    pub fn n_support_vectors(&self) -> usize {
        self.support_vectors.len()
    }

    /// Split into a structured header and the dense float blocks
    /// (standardizer means, stds, then support vectors row-major).
    pub fn pack(&self) -> (SvmPack, Vec<f64>) {
        let width = self.standardizer.means.len();
        let mut floats = Vec::with_capacity(2 * width + self.support_vectors.len() * width);
        floats.extend_from_slice(&self.standardizer.means);
        floats.extend_from_slice(&self.standardizer.stds);
        for sv in &self.support_vectors {
            floats.extend_from_slice(sv);
        }
        let pack = SvmPack {
            config: self.config.clone(),
            n_classes: self.n_classes,
            width,
            n_support: self.support_vectors.len(),
            solutions: self.solutions.clone(),
        };
        (pack, floats)
    }

    /// Rebuild from [`pack`](Self::pack) output.
    pub fn unpack(pack: SvmPack, floats: &[f64]) -> Result<SvmModel> {
        let expected = 2 * pack.width + pack.n_support * pack.width;
        if floats.len() != expected {
            return Err(Error::Mismatch(format!(
                "SVM float block holds {} values, expected {expected}",
                floats.len()
            )));
        }
        let means = floats[..pack.width].to_vec();
        let stds = floats[pack.width..2 * pack.width].to_vec();
        let support_vectors: Vec<Vec<f64>> = (0..pack.n_support)
            .map(|i| {
                let start = 2 * pack.width + i * pack.width;
                floats[start..start + pack.width].to_vec()
            })
            .collect();
        for solution in &pack.solutions {
            if solution.coefs.iter().any(|&(i, _)| i >= pack.n_support) {
                return Err(Error::Mismatch("SVM coefficient indexes a missing support vector".into()));
            }
        }
        Ok(SvmModel {
            config: pack.config,
            standardizer: Standardizer { means, stds },
            n_classes: pack.n_classes,
            support_vectors,
            solutions: pack.solutions,
        })
    }

    /// Per-class decision values for one row.
    pub fn decision_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.standardizer.means.len() {
            return Err(Error::Mismatch(format!(
                "row width {} does not match SVM width {}",
                row.len(),
                self.standardizer.means.len()
            )));
        }
        let z = self.standardizer.apply(row);
        let kernels: Vec<f64> = self
            .support_vectors
            .iter()
            .map(|sv| rbf(&z, sv, self.config.gamma))
            .collect();
        Ok(self
            .solutions
            .iter()
            .map(|s| {
                s.bias + s.coefs.iter().map(|&(i, c)| c * kernels[i]).sum::<f64>()
            })
            .collect())
    }

    /// Argmax of the per-class decisions; ties resolve to the lowest class.
    pub fn predict_row(&self, row: &[f64]) -> Result<u32> {
        let decisions = self.decision_row(row)?;
        let mut best = 0usize;
        for (i, &d) in decisions.iter().enumerate() {
            if d > decisions[best] {
                best = i;
            }
        }
        Ok(best as u32)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}
