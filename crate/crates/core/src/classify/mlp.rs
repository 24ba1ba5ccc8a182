//! Two-hidden-layer perceptron with ReLU activations, softmax output,
//! inverted dropout, Adam, and early stopping on a stratified validation
//! slice carved out of the training rows.
//!
//! Everything is plain f64 with a fixed update order, so training is
//! reproducible from the master seed alone. [`MlpNetwork`] exposes
//! parameter get/set and an analytic loss/gradient pair precisely so the
//! backward pass can be audited against finite differences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Widths of the two hidden layers.
    pub hidden: (usize, usize),
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Drop probability on both hidden activations during training.
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    /// Fraction of training rows held out per class for validation.
    pub val_fraction: f64,
}

impl Default for MlpConfig {
    /// The full-size network used for final training runs.
    fn default() -> Self {
        MlpConfig {
            hidden: (256, 128),
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout: 0.5,
            batch_size: 32,
            max_epochs: 100,
            patience: 3,
            val_fraction: 0.1,
        }
    }
}

impl MlpConfig {
    /// The smaller, more patient network used inside the screening grid,
    /// where hundreds of fits run on reduced inputs.
    pub fn screening() -> Self {
        MlpConfig { hidden: (128, 64), patience: 5, ..MlpConfig::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return Err(Error::InvalidParam("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParam("dropout must lie in [0,1)".into()));
        }
        if !(0.0..0.5).contains(&self.val_fraction) {
            return Err(Error::InvalidParam("val fraction must lie in [0,0.5)".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidParam("batch size and epochs must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidParam("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Raw network parameters: three dense layers stored row-major
/// (`w[out][in]`), biases zero-initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    /// `[input, hidden1, hidden2, classes]`.
    dims: [usize; 4],
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: Vec<f64>,
}

/// Per-batch forward caches needed by the backward pass.
struct Forward {
    a1: Vec<Vec<f64>>,
    a2: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

fn he_uniform(rng: &mut impl Rng, fan_in: usize, count: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..count).map(|_| rng.random_range(-limit..limit)).collect()
}

fn dense(w: &[f64], b: &[f64], x: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    (0..out_dim)
        .map(|o| {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            b[o] + row.iter().zip(x).map(|(&wi, &xi)| wi * xi).sum::<f64>()
        })
        .collect()
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl MlpNetwork {
    /// He-uniform weight init, zero biases.
    pub fn init(dims: [usize; 4], rng: &mut impl Rng) -> Self {
        MlpNetwork {
            dims,
            w1: he_uniform(rng, dims[0], dims[1] * dims[0]),
            b1: vec![0.0; dims[1]],
            w2: he_uniform(rng, dims[1], dims[2] * dims[1]),
            b2: vec![0.0; dims[2]],
            w3: he_uniform(rng, dims[2], dims[3] * dims[2]),
            b3: vec![0.0; dims[3]],
        }
    }

    /// All-zero parameters — every input then maps to the uniform
    /// distribution over classes. Exists for sanity tests.
    pub fn zeroed(dims: [usize; 4]) -> Self {
        MlpNetwork {
            dims,
            w1: vec![0.0; dims[1] * dims[0]],
            b1: vec![0.0; dims[1]],
            w2: vec![0.0; dims[2] * dims[1]],
            b2: vec![0.0; dims[2]],
            w3: vec![0.0; dims[3] * dims[2]],
            b3: vec![0.0; dims[3]],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + self.b3.len()
    }

    /// Flatten parameters in the fixed order `w1, b1, w2, b2, w3, b3`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for part in [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3] {
            p.extend_from_slice(part);
        }
        p
    }

    /// Overwrite parameters from the flat layout produced by [`params`].
    ///
    /// [`params`]: MlpNetwork::params
    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Mismatch(format!(
                "parameter vector has {} entries, network needs {}",
                p.len(),
                self.n_params()
            )));
        }
        let mut offset = 0;
        for part in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ] {
            let len = part.len();
            part.copy_from_slice(&p[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Class probabilities for one row, dropout off.
    pub fn predict_proba_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims[0] {
            return Err(Error::Mismatch(format!(
                "row width {} does not match input width {}",
                x.len(),
                self.dims[0]
            )));
        }
        let mut a1 = dense(&self.w1, &self.b1, x, self.dims[1], self.dims[0]);
        relu(&mut a1);
        let mut a2 = dense(&self.w2, &self.b2, &a1, self.dims[2], self.dims[1]);
        relu(&mut a2);
        Ok(softmax(&dense(&self.w3, &self.b3, &a2, self.dims[3], self.dims[2])))
    }

    /// Forward pass over a batch with optional dropout masks (already
    /// scaled for inverted dropout). Masks, when given, are per-sample.
    fn forward(&self, x: &[&[f64]], masks: Option<(&[Vec<f64>], &[Vec<f64>])>) -> Forward {
        let mut a1s = Vec::with_capacity(x.len());
        let mut a2s = Vec::with_capacity(x.len());
        let mut probs = Vec::with_capacity(x.len());
        for (s, row) in x.iter().enumerate() {
            let mut a1 = dense(&self.w1, &self.b1, row, self.dims[1], self.dims[0]);
            relu(&mut a1);
            if let Some((m1, _)) = masks {
                for (a, &m) in a1.iter_mut().zip(&m1[s]) {
                    *a *= m;
                }
            }
            let mut a2 = dense(&self.w2, &self.b2, &a1, self.dims[2], self.dims[1]);
            relu(&mut a2);
            if let Some((_, m2)) = masks {
                for (a, &m) in a2.iter_mut().zip(&m2[s]) {
                    *a *= m;
                }
            }
            probs.push(softmax(&dense(&self.w3, &self.b3, &a2, self.dims[3], self.dims[2])));
            a1s.push(a1);
            a2s.push(a2);
        }
        Forward { a1: a1s, a2: a2s, probs }
    }

    /// Mean cross-entropy of the batch, dropout off.
    pub fn loss(&self, x: &[Vec<f64>], y: &[u32]) -> Result<f64> {
        let refs: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
        let fwd = self.forward(&refs, None);
        let mut total = 0.0;
        for (p, &label) in fwd.probs.iter().zip(y) {
            total -= p[label as usize].ln();
        }
        let loss = total / x.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric("cross-entropy diverged to a non-finite value".into()));
        }
        Ok(loss)
    }

    /// Mean cross-entropy and its analytic gradient (same flat layout as
    /// [`params`](MlpNetwork::params)), dropout off. This is the hook the
    /// finite-difference audit drives.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[u32]) -> Result<(f64, Vec<f64>)> {
        let refs: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
        let fwd = self.forward(&refs, None);
        let grads = self.backward(&refs, y, &fwd, None);
        let mut total = 0.0;
        for (p, &label) in fwd.probs.iter().zip(y) {
            total -= p[label as usize].ln();
        }
        let loss = total / x.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric("cross-entropy diverged to a non-finite value".into()));
        }
        Ok((loss, grads))
    }

    /// Backward pass for mean cross-entropy. Masks must be the ones used
    /// in the matching forward call.
    fn backward(
        &self,
        x: &[&[f64]],
        y: &[u32],
        fwd: &Forward,
        masks: Option<(&[Vec<f64>], &[Vec<f64>])>,
    ) -> Vec<f64> {
        let n = x.len() as f64;
        let [d_in, d_h1, d_h2, d_out] = self.dims;
        let mut gw1 = vec![0.0f64; d_h1 * d_in];
        let mut gb1 = vec![0.0f64; d_h1];
        let mut gw2 = vec![0.0f64; d_h2 * d_h1];
        let mut gb2 = vec![0.0f64; d_h2];
        let mut gw3 = vec![0.0f64; d_out * d_h2];
        let mut gb3 = vec![0.0f64; d_out];
        for (s, row) in x.iter().enumerate() {
            // dL/dlogit = (softmax − onehot) / n
            let mut dz3: Vec<f64> = fwd.probs[s].clone();
            dz3[y[s] as usize] -= 1.0;
            for v in &mut dz3 {
                *v /= n;
            }
            for o in 0..d_out {
                gb3[o] += dz3[o];
                for i in 0..d_h2 {
                    gw3[o * d_h2 + i] += dz3[o] * fwd.a2[s][i];
                }
            }
            let mut da2 = vec![0.0f64; d_h2];
            for o in 0..d_out {
                for i in 0..d_h2 {
                    da2[i] += dz3[o] * self.w3[o * d_h2 + i];
                }
            }
            if let Some((_, m2)) = masks {
                for (d, &m) in da2.iter_mut().zip(&m2[s]) {
                    *d *= m;
                }
            }
            // ReLU gate: the post-activation (post-mask) value is nonzero
            // exactly where the pre-activation was positive and kept.
            let dz2: Vec<f64> = da2
                .iter()
                .zip(&fwd.a2[s])
                .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
                .collect();
            for o in 0..d_h2 {
                gb2[o] += dz2[o];
                for i in 0..d_h1 {
                    gw2[o * d_h1 + i] += dz2[o] * fwd.a1[s][i];
                }
            }
            let mut da1 = vec![0.0f64; d_h1];
            for o in 0..d_h2 {
                for i in 0..d_h1 {
                    da1[i] += dz2[o] * self.w2[o * d_h1 + i];
                }
            }
            if let Some((m1, _)) = masks {
                for (d, &m) in da1.iter_mut().zip(&m1[s]) {
                    *d *= m;
                }
            }
            let dz1: Vec<f64> = da1
                .iter()
                .zip(&fwd.a1[s])
                .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
                .collect();
            for o in 0..d_h1 {
                gb1[o] += dz1[o];
                for i in 0..d_in {
                    gw1[o * d_in + i] += dz1[o] * row[i];
                }
            }
        }
        let mut g = Vec::with_capacity(self.n_params());
        for part in [gw1, gb1, gw2, gb2, gw3, gb3] {
            g.extend(part);
        }
        g
    }
}

/// Adam state over the flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &MlpConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grads[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Stratified validation split: per class, shuffle and hold out
/// `round(fraction · count)` rows (at least 1 when the class has ≥ 2).
/// Returns (train indices, val indices), both in ascending order.
fn stratified_val_split(
    y: &[u32],
    n_classes: usize,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in y.iter().enumerate() {
        per_class[label as usize].push(i);
    }
    let mut val = Vec::new();
    for (c, members) in per_class.iter_mut().enumerate() {
        if members.len() < 2 || fraction <= 0.0 {
            continue;
        }
        crate::rng::shuffle(members, seed, &format!("mlp-val-{c}"));
        let take = ((members.len() as f64 * fraction).round() as usize)
            .clamp(1, members.len() - 1);
        val.extend(members[..take].iter().copied());
    }
    let mut val_sorted = val.clone();
    val_sorted.sort_unstable();
    let in_val: std::collections::BTreeSet<usize> = val_sorted.iter().copied().collect();
    let train: Vec<usize> = (0..y.len()).filter(|i| !in_val.contains(i)).collect();
    (train, val_sorted)
}

/// Per-epoch training record, the raw material for history CSVs and
/// loss/accuracy curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch (with dropout active).
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// A trained perceptron classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    network: MlpNetwork,
    /// Epochs actually run before early stopping (or the cap).
    pub epochs_run: usize,
    /// Best validation loss seen, when a validation slice existed.
    pub best_val_loss: Option<f64>,
    /// One entry per epoch run.
    pub history: Vec<EpochStats>,
}

/// The structured half of a packed model: everything except the dense
/// parameter vector, which travels as a flat float array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPack {
    pub dims: [usize; 4],
    pub epochs_run: usize,
    pub best_val_loss: Option<f64>,
    pub history: Vec<EpochStats>,
}

impl MlpModel {
    /// Train with Adam + early stopping. Deterministic in `seed`.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u32],
        n_classes: usize,
        config: MlpConfig,
        seed: u64,
    ) -> Result<MlpModel> {
        config.validate()?;
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
        let dims = [width, config.hidden.0, config.hidden.1, n_classes];
        let mut init_rng = seeded_rng(seed, "mlp-init");
        let mut network = MlpNetwork::init(dims, &mut init_rng);

        let (train_idx, val_idx) =
            stratified_val_split(y, n_classes, config.val_fraction, seed);
        let (train_idx, val_idx) = if train_idx.is_empty() {
            ((0..x.len()).collect(), Vec::new())
        } else {
            (train_idx, val_idx)
        };
        let val_x: Vec<Vec<f64>> = val_idx.iter().map(|&i| x[i].clone()).collect();
        let val_y: Vec<u32> = val_idx.iter().map(|&i| y[i]).collect();

        let mut train_rng = seeded_rng(seed, "mlp-train");
        let mut adam = Adam::new(network.n_params());
        let mut params = network.params();
        let mut order: Vec<usize> = train_idx.clone();
        let mut best_params = params.clone();
        let mut best_val = f64::INFINITY;
        let mut stale_epochs = 0usize;
        let mut epochs_run = 0usize;
        let mut history: Vec<EpochStats> = Vec::new();
        let keep = 1.0 - config.dropout;

        for _epoch in 0..config.max_epochs {
            epochs_run += 1;
            let mut epoch_loss = 0.0f64;
            // In-epoch Fisher-Yates on the training order.
            for i in (1..order.len()).rev() {
                let j = train_rng.random_range(0..=i);
                order.swap(i, j);
            }
            for batch in order.chunks(config.batch_size) {
                let rows: Vec<&[f64]> = batch.iter().map(|&i| x[i].as_slice()).collect();
                let labels: Vec<u32> = batch.iter().map(|&i| y[i]).collect();
                let masks = if config.dropout > 0.0 {
                    let m1: Vec<Vec<f64>> = (0..rows.len())
                        .map(|_| {
                            (0..dims[1])
                                .map(|_| {
                                    if train_rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }
                                })
                                .collect()
                        })
                        .collect();
                    let m2: Vec<Vec<f64>> = (0..rows.len())
                        .map(|_| {
                            (0..dims[2])
                                .map(|_| {
                                    if train_rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }
                                })
                                .collect()
                        })
                        .collect();
                    Some((m1, m2))
                } else {
                    None
                };
                let mask_refs = masks.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
                let fwd = network.forward(&rows, mask_refs);
                let mut batch_loss = 0.0;
                for (p, &label) in fwd.probs.iter().zip(&labels) {
                    batch_loss -= p[label as usize].ln();
                }
                if !batch_loss.is_finite() {
                    return Err(Error::Numeric("training loss became non-finite".into()));
                }
                epoch_loss += batch_loss;
                let grads = network.backward(&rows, &labels, &fwd, mask_refs);
                adam.step(&mut params, &grads, &config);
                network.set_params(&params)?;
            }
            let mut stats = EpochStats {
                epoch: epochs_run,
                train_loss: epoch_loss / train_idx.len() as f64,
                val_loss: None,
                val_accuracy: None,
            };
            if !val_x.is_empty() {
                let val_loss = network.loss(&val_x, &val_y)?;
                let mut correct = 0usize;
                for (row, &label) in val_x.iter().zip(&val_y) {
                    let probs = network.predict_proba_row(row)?;
                    let mut arg = 0usize;
                    for (i, &p) in probs.iter().enumerate() {
                        if p > probs[arg] {
                            arg = i;
                        }
                    }
                    if arg as u32 == label {
                        correct += 1;
                    }
                }
                stats.val_loss = Some(val_loss);
                stats.val_accuracy = Some(correct as f64 / val_x.len() as f64);
                history.push(stats);
                if val_loss < best_val {
                    best_val = val_loss;
                    best_params.copy_from_slice(&params);
                    stale_epochs = 0;
                } else {
                    stale_epochs += 1;
                    if stale_epochs >= config.patience {
                        break;
                    }
                }
            } else {
                history.push(stats);
            }
        }
        if !val_x.is_empty() {
            network.set_params(&best_params)?;
        }
        Ok(MlpModel {
            network,
            epochs_run,
            best_val_loss: if val_x.is_empty() { None } else { Some(best_val) },
            history,
        })
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.network
    }

    /// Split into a structured header and the flat parameter vector.
    pub fn pack(&self) -> (MlpPack, Vec<f64>) {
        (
            MlpPack {
                dims: self.network.dims(),
                epochs_run: self.epochs_run,
                best_val_loss: self.best_val_loss,
                history: self.history.clone(),
            },
            self.network.params(),
        )
    }

    /// Rebuild from [`pack`](Self::pack) output.
    pub fn unpack(pack: MlpPack, params: &[f64]) -> Result<MlpModel> {
        let mut network = MlpNetwork::zeroed(pack.dims);
        network.set_params(params)?;
        Ok(MlpModel {
            network,
            epochs_run: pack.epochs_run,
            best_val_loss: pack.best_val_loss,
            history: pack.history,
        })
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.network.predict_proba_row(r)).collect()
    }

    /// Argmax class; ties resolve to the lowest index.
    pub fn predict_row(&self, row: &[f64]) -> Result<u32> {
        let probs = self.network.predict_proba_row(row)?;
        let mut best = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(best as u32)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}
