//! Train-only preprocessing: Min-Max scaling and PCA.
//!
//! Both transforms are fitted exclusively on training rows and then applied
//! unchanged to anything else — test rows never influence a fitted
//! parameter. The PCA eigenproblem is solved with a cyclic Jacobi sweep
//! (deterministic, no iteration-order ambiguity); when the feature
//! dimension exceeds the sample count the N×N Gram matrix is decomposed
//! instead of the D×D covariance and the eigenvectors are mapped back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column Min-Max parameters. Applying maps the training minimum to 0
/// and maximum to 1; columns that were constant in training map to 0.
/// Out-of-range values (possible on test rows) extrapolate linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

fn check_rect(rows: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::Mismatch("no rows to fit".into()));
    };
    let width = first.len();
    if width == 0 {
        return Err(Error::Mismatch("rows have zero width".into()));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Mismatch("ragged rows".into()));
    }
    Ok(width)
}

impl ScalerParams {
    /// Fit per-column minima and ranges on training rows.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let width = check_rect(rows)?;
        let mut mins = vec![f64::INFINITY; width];
        let mut maxs = vec![f64::NEG_INFINITY; width];
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        Ok(ScalerParams { mins, ranges })
    }

    pub fn width(&self) -> usize {
        self.mins.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mins.len() {
            return Err(Error::Mismatch(format!(
                "row width {} does not match scaler width {}",
                row.len(),
                self.mins.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.ranges[j] > 0.0 {
                    (v - self.mins[j]) / self.ranges[j]
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Flatten to `mins ++ ranges` for a binary float block.
    pub fn pack(&self) -> Vec<f64> {
        let mut floats = self.mins.clone();
        floats.extend_from_slice(&self.ranges);
        floats
    }

    /// Rebuild from [`pack`](Self::pack) output.
    pub fn unpack(width: usize, floats: &[f64]) -> Result<Self> {
        if floats.len() != 2 * width {
            return Err(Error::Mismatch(format!(
                "scaler float block holds {} values, expected {}",
                floats.len(),
                2 * width
            )));
        }
        Ok(ScalerParams {
            mins: floats[..width].to_vec(),
            ranges: floats[width..].to_vec(),
        })
    }
}

/// Symmetric eigendecomposition by the cyclic Jacobi method
/// (Rutishauser's thresholded variant). Returns eigenvalues and an
/// orthonormal matrix whose COLUMNS are the matching eigenvectors, in
/// descending eigenvalue order.
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n == 1 {
        return (vec![a[0]], v);
    }
    const MAX_SWEEPS: usize = 100;
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].abs())
            .sum();
        if off == 0.0 {
            break;
        }
        // Early sweeps skip entries below a coarse threshold; later sweeps
        // rotate every nonzero off-diagonal entry.
        let tresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                // Tiny entries relative to the diagonal are flushed to zero
                // once the iteration has settled.
                if sweep > 3
                    && a[p * n + p].abs() + g == a[p * n + p].abs()
                    && a[q * n + q].abs() + g == a[q * n + q].abs()
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }
                let h = a[q * n + q] - a[p * n + p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let delta = t * apq;
                a[p * n + p] -= delta;
                a[q * n + q] += delta;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                let rotate = |m: &mut Vec<f64>, i: usize, j: usize| {
                    let (x, y) = (m[i], m[j]);
                    m[i] = x - s * (y + tau * x);
                    m[j] = y + s * (x - tau * y);
                };
                for i in 0..p {
                    rotate(&mut a, i * n + p, i * n + q);
                    let (x, y) = (a[p * n + i], a[q * n + i]);
                    a[p * n + i] = x - s * (y + tau * x);
                    a[q * n + i] = y + s * (x - tau * y);
                }
                for i in p + 1..q {
                    let (x, y) = (a[p * n + i], a[i * n + q]);
                    a[p * n + i] = x - s * (y + tau * x);
                    a[i * n + q] = y + s * (x - tau * y);
                    a[i * n + p] = a[p * n + i];
                    a[q * n + i] = a[i * n + q];
                }
                for i in q + 1..n {
                    let (x, y) = (a[p * n + i], a[q * n + i]);
                    a[p * n + i] = x - s * (y + tau * x);
                    a[q * n + i] = y + s * (x - tau * y);
                    a[i * n + p] = a[p * n + i];
                    a[i * n + q] = a[q * n + i];
                }
                for i in 0..n {
                    rotate(&mut v, i * n + p, i * n + q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0f64; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + new_col] = v[row * n + old_col];
        }
    }
    (eigenvalues, vectors)
}

/// Fitted PCA basis: centered projection onto the leading eigenvectors of
/// the sample covariance (denominator `n − 1`).
///
/// Component signs are canonicalized so the entry of largest magnitude
/// (ties: lowest index) is positive, making the fitted basis independent of
/// solver arbitrariness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k` rows, each an input-dimension unit vector.
    components: Vec<Vec<f64>>,
    /// Sample variances along each component, descending.
    explained_variance: Vec<f64>,
    /// Trace of the sample covariance (total variance).
    total_variance: f64,
}

impl PcaModel {
    /// Largest component count fittable from `n_rows` samples of width
    /// `n_cols`: `min(n_cols, n_rows − 1)` (centering removes one degree of
    /// freedom).
    pub fn max_components(n_rows: usize, n_cols: usize) -> usize {
        n_cols.min(n_rows.saturating_sub(1))
    }

    /// Fit a `k`-component basis on training rows.
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let width = check_rect(rows)?;
        let n = rows.len();
        let cap = Self::max_components(n, width);
        if k == 0 || k > cap {
            return Err(Error::InvalidParam(format!(
                "cannot fit {k} components from {n} rows of width {width} (max {cap})"
            )));
        }
        let mut mean = vec![0.0f64; width];
        for row in rows {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let centered: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| row.iter().zip(&mean).map(|(&v, &m)| v - m).collect())
            .collect();
        let denom = (n - 1) as f64;
        let total_variance: f64 = (0..width)
            .map(|j| centered.iter().map(|r| r[j] * r[j]).sum::<f64>() / denom)
            .sum();

        let (mut eigenvalues, mut components) = if width <= n {
            // Covariance side: D×D.
            let mut cov = vec![0.0f64; width * width];
            for r in &centered {
                for i in 0..width {
                    for j in i..width {
                        cov[i * width + j] += r[i] * r[j];
                    }
                }
            }
            for i in 0..width {
                for j in i..width {
                    cov[i * width + j] /= denom;
                    cov[j * width + i] = cov[i * width + j];
                }
            }
            let (vals, vecs) = jacobi_eigen(cov, width);
            let comps: Vec<Vec<f64>> = (0..k)
                .map(|c| (0..width).map(|r| vecs[r * width + c]).collect())
                .collect();
            (vals[..k].to_vec(), comps)
        } else {
            // Gram side: N×N, eigenvectors mapped back through Xᵀ.
            let mut gram = vec![0.0f64; n * n];
            for i in 0..n {
                for j in i..n {
                    let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                    gram[i * n + j] = dot / denom;
                    gram[j * n + i] = gram[i * n + j];
                }
            }
            let (vals, vecs) = jacobi_eigen(gram, n);
            let mut comps = Vec::with_capacity(k);
            for c in 0..k {
                let u: Vec<f64> = (0..n).map(|r| vecs[r * n + c]).collect();
                let mut dir = vec![0.0f64; width];
                for (i, row) in centered.iter().enumerate() {
                    for (d, &v) in dir.iter_mut().zip(row) {
                        *d += u[i] * v;
                    }
                }
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    return Err(Error::Numeric(format!(
                        "component {c} exceeds the numerical rank of the training data"
                    )));
                }
                for d in &mut dir {
                    *d /= norm;
                }
                comps.push(dir);
            }
            (vals[..k].to_vec(), comps)
        };

        for value in &mut eigenvalues {
            // Clamp eigenvalue noise: sample covariance is PSD.
            if *value < 0.0 {
                *value = 0.0;
            }
        }
        for comp in &mut components {
            let mut pivot = 0;
            for (i, v) in comp.iter().enumerate() {
                if v.abs() > comp[pivot].abs() {
                    pivot = i;
                }
            }
            if comp[pivot] < 0.0 {
                for v in comp.iter_mut() {
                    *v = -*v;
                }
            }
        }
        Ok(PcaModel { mean, components, explained_variance: eigenvalues, total_variance })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn input_width(&self) -> usize {
        self.mean.len()
    }

    /// Flatten to `mean ++ components (row-major) ++ explained ++ [total]`
    /// for a binary float block.
    pub fn pack(&self) -> Vec<f64> {
        let (k, d) = (self.components.len(), self.mean.len());
        let mut floats = Vec::with_capacity(d + k * d + k + 1);
        floats.extend_from_slice(&self.mean);
        for comp in &self.components {
            floats.extend_from_slice(comp);
        }
        floats.extend_from_slice(&self.explained_variance);
        floats.push(self.total_variance);
        floats
    }

    /// Rebuild from [`pack`](Self::pack) output.
    pub fn unpack(n_components: usize, input_width: usize, floats: &[f64]) -> Result<Self> {
        let (k, d) = (n_components, input_width);
        let expected = d + k * d + k + 1;
        if floats.len() != expected {
            return Err(Error::Mismatch(format!(
                "projection float block holds {} values, expected {expected}",
                floats.len()
            )));
        }
        let mean = floats[..d].to_vec();
        let components: Vec<Vec<f64>> =
            (0..k).map(|c| floats[d + c * d..d + (c + 1) * d].to_vec()).collect();
        let explained_variance = floats[d + k * d..d + k * d + k].to_vec();
        let total_variance = floats[expected - 1];
        Ok(PcaModel { mean, components, explained_variance, total_variance })
    }

    /// Sample variance captured by each component, descending.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Fraction of total variance captured by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance > 0.0 {
            self.explained_variance.iter().map(|v| v / self.total_variance).collect()
        } else {
            vec![0.0; self.explained_variance.len()]
        }
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::Mismatch(format!(
                "row width {} does not match PCA width {}",
                row.len(),
                self.mean.len()
            )));
        }
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(&v, &m)| v - m).collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    pub fn project(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.project_row(r)).collect()
    }

    /// Map a projected vector back to input space.
    pub fn reconstruct_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.components.len() {
            return Err(Error::Mismatch(format!(
                "projection width {} does not match {} components",
                z.len(),
                self.components.len()
            )));
        }
        let mut out = self.mean.clone();
        for (zi, comp) in z.iter().zip(&self.components) {
            for (o, &c) in out.iter_mut().zip(comp) {
                *o += zi * c;
            }
        }
        Ok(out)
    }
}
