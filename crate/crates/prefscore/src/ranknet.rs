//! Pairwise-trained scoring network: a one-hidden-layer MLP applied to both
//! essays of a pair with shared weights; the sigmoid of the score difference
//! is trained toward the debiased label with binary cross-entropy.
//!
//! Training is strictly sequential and seeded, so a given (data, config)
//! always produces bit-identical parameters and loss curves.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EssaySet, PairwiseRecord, ScoreMethod, ScoreTable};
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::seeding::rng_for_context;

/// Smallest/largest prediction admitted into a logarithm.
const PRED_CLAMP: f64 = 1e-12;

/// Parameters of the scoring MLP: `score(h) = w2 · relu(W1 h + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankNetParams {
    /// Input (embedding) dimension.
    pub d: usize,
    /// Hidden width.
    pub h: usize,
    /// H×D weight matrix, row-major.
    pub w1: Vec<f64>,
    /// H biases of the hidden layer.
    pub b1: Vec<f64>,
    /// H weights of the output layer.
    pub w2: Vec<f64>,
    /// Output bias. Cancels in every score difference, so it never affects
    /// pair predictions or rankings.
    pub b2: f64,
}

impl RankNetParams {
    /// All-zero parameters of the given shape.
    pub fn zeros(d: usize, h: usize) -> Self {
        RankNetParams {
            d,
            h,
            w1: vec![0.0; h * d],
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    /// Seeded uniform init in ±1/√fan_in per layer; biases zero.
    pub fn init(d: usize, h: usize, seed: u64) -> Self {
        let mut rng = rng_for_context(seed, &["ranknet-init"]);
        let bound1 = 1.0 / (d as f64).sqrt();
        let bound2 = 1.0 / (h as f64).sqrt();
        RankNetParams {
            d,
            h,
            w1: (0..h * d)
                .map(|_| rng.gen_range(-bound1..=bound1))
                .collect(),
            b1: vec![0.0; h],
            w2: (0..h).map(|_| rng.gen_range(-bound2..=bound2)).collect(),
            b2: 0.0,
        }
    }

    fn check_shapes(&self) -> Result<()> {
        if self.d == 0 || self.h == 0 {
            return Err(Error::invalid(
                "network dimensions must be positive".to_string(),
            ));
        }
        if self.w1.len() != self.h * self.d || self.b1.len() != self.h || self.w2.len() != self.h {
            return Err(Error::invalid(format!(
                "parameter shapes inconsistent with D={} H={}",
                self.d, self.h
            )));
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.001,
            batch_size: 4096,
            hidden_units: 256,
            dropout_rate: 0.3,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_units == 0 {
            return Err(Error::config(
                "epochs, batch_size and hidden_units must be positive",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must lie in [0, 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// Per-dimension affine map fitted on the training essays and stored with
/// the model, so unseen essays are normalized with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation; a dimension with (near-)zero
    /// spread keeps scale 1 so it passes through centered but unscaled.
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fit mean and standard deviation per dimension over the rows.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Empty {
            context: "standardizer fit over no embeddings".to_string(),
        })?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    id: "standardizer fit row".to_string(),
                    expected: d,
                    actual: row.len(),
                });
            }
            for (m, &v) in mean.iter_mut().zip(*row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut scale = vec![0.0; d];
        for row in rows {
            for ((s, &v), &m) in scale.iter_mut().zip(*row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scale {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                id: "standardizer input".to_string(),
                expected: self.mean.len(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect())
    }
}

/// How [`score`] treats the hidden layer.
#[derive(Debug, Clone, Copy)]
pub enum ScoreMode<'a> {
    /// Deterministic forward pass; the full hidden vector contributes.
    Eval,
    /// Dropout forward pass: hidden unit `k` is kept iff `mask[k]`, and kept
    /// units are divided by `1 − dropout_rate` so activations keep their
    /// expected magnitude.
    Train { mask: &'a [bool], dropout_rate: f64 },
}

/// Forward pass of the scoring network on one embedding.
pub fn score(params: &RankNetParams, input: &[f64], mode: ScoreMode<'_>) -> Result<f64> {
    params.check_shapes()?;
    if input.len() != params.d {
        return Err(Error::DimensionMismatch {
            id: "network input".to_string(),
            expected: params.d,
            actual: input.len(),
        });
    }
    let hidden = hidden_activations(params, input, mode);
    let mut output = params.b2;
    for (w, z) in params.w2.iter().zip(&hidden) {
        output += w * z;
    }
    Ok(output)
}

/// Post-ReLU (and post-dropout, in train mode) hidden vector.
fn hidden_activations(params: &RankNetParams, input: &[f64], mode: ScoreMode<'_>) -> Vec<f64> {
    let mut hidden = vec![0.0; params.h];
    for k in 0..params.h {
        let mut pre = params.b1[k];
        let row = &params.w1[k * params.d..(k + 1) * params.d];
        for (w, x) in row.iter().zip(input) {
            pre += w * x;
        }
        let mut z = pre.max(0.0);
        if let ScoreMode::Train { mask, dropout_rate } = mode {
            z = if mask[k] {
                z / (1.0 - dropout_rate)
            } else {
                0.0
            };
        }
        hidden[k] = z;
    }
    hidden
}

/// Probability that the first essay is preferred: `σ(s_i − s_j)`.
pub fn predict_pref(s_i: f64, s_j: f64) -> f64 {
    sigmoid(s_i - s_j)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy over pairs; predictions are clamped to
/// `[1e−12, 1−1e−12]` before the logarithms so saturated sigmoids cannot
/// produce an infinite loss.
pub fn bce_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::invalid(format!(
            "bce_loss needs equal nonempty lengths, got {} preds and {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &t) in preds.iter().zip(targets) {
        total += pair_bce(p, t);
    }
    Ok(total / preds.len() as f64)
}

fn pair_bce(pred: f64, target: f64) -> f64 {
    let p = pred.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// One training pair: two embeddings (already standardized) and the
/// debiased label.
#[derive(Debug, Clone, Copy)]
pub struct PairExample<'a> {
    pub first: &'a [f64],
    pub second: &'a [f64],
    pub target: f64,
}

/// Parameter-shaped gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Analytic gradient of `mean BCE + (weight_decay/2)·(‖W1‖² + ‖W2‖²)` over
/// the batch, together with the mean BCE itself. When `masks` is given it
/// holds one hidden-layer dropout mask per pair, applied identically to both
/// forward passes of that pair.
pub fn gradients(
    params: &RankNetParams,
    batch: &[PairExample<'_>],
    weight_decay: f64,
    masks: Option<&[Vec<bool>]>,
    dropout_rate: f64,
) -> Result<(Gradients, f64)> {
    params.check_shapes()?;
    if batch.is_empty() {
        return Err(Error::Empty {
            context: "gradient over an empty batch".to_string(),
        });
    }
    if let Some(masks) = masks {
        if masks.len() != batch.len() {
            return Err(Error::invalid(format!(
                "got {} dropout masks for {} pairs",
                masks.len(),
                batch.len()
            )));
        }
    }

    let (d, h) = (params.d, params.h);
    let mut grad = Gradients {
        w1: vec![0.0; h * d],
        b1: vec![0.0; h],
        w2: vec![0.0; h],
        b2: 0.0,
    };
    let mut loss_total = 0.0;
    let inv_batch = 1.0 / batch.len() as f64;

    let mut pre = vec![0.0; h]; // pre-activations, reused per branch
    let mut hidden = vec![0.0; h]; // post-ReLU/dropout, reused per branch

    for (pair_index, pair) in batch.iter().enumerate() {
        for side in [pair.first, pair.second] {
            if side.len() != d {
                return Err(Error::DimensionMismatch {
                    id: "batch input".to_string(),
                    expected: d,
                    actual: side.len(),
                });
            }
        }
        let mask = masks.map(|m| m[pair_index].as_slice());

        // forward both branches with the pair's shared mask
        let branch = |input: &[f64], pre: &mut [f64], hidden: &mut [f64]| -> f64 {
            let mut s = params.b2;
            for k in 0..h {
                let mut a = params.b1[k];
                let row = &params.w1[k * d..(k + 1) * d];
                for (w, x) in row.iter().zip(input) {
                    a += w * x;
                }
                pre[k] = a;
                let mut z = a.max(0.0);
                if let Some(mask) = mask {
                    z = if mask[k] {
                        z / (1.0 - dropout_rate)
                    } else {
                        0.0
                    };
                }
                hidden[k] = z;
                s += params.w2[k] * z;
            }
            s
        };
        let mut pre_j = vec![0.0; h];
        let mut hidden_j = vec![0.0; h];
        let s_i = branch(pair.first, &mut pre, &mut hidden);
        let s_j = branch(pair.second, &mut pre_j, &mut hidden_j);

        let pred = sigmoid(s_i - s_j);
        loss_total += pair_bce(pred, pair.target);

        // dL/d(s_i − s_j) of the unclamped cross-entropy
        let g = (pred - pair.target) * inv_batch;

        // backprop through each branch; the second branch enters with −g
        for (sign, input, pre, hidden) in [
            (1.0, pair.first, &pre, &hidden),
            (-1.0, pair.second, &pre_j, &hidden_j),
        ] {
            let ds = sign * g;
            grad.b2 += ds;
            for k in 0..h {
                grad.w2[k] += ds * hidden[k];
                // through dropout and ReLU
                let keep = match mask {
                    Some(mask) => {
                        if mask[k] {
                            1.0 / (1.0 - dropout_rate)
                        } else {
                            0.0
                        }
                    }
                    None => 1.0,
                };
                let da = if pre[k] > 0.0 {
                    ds * params.w2[k] * keep
                } else {
                    0.0
                };
                if da != 0.0 {
                    grad.b1[k] += da;
                    let row = &mut grad.w1[k * d..(k + 1) * d];
                    for (gw, &x) in row.iter_mut().zip(input) {
                        *gw += da * x;
                    }
                }
            }
        }
    }

    if weight_decay != 0.0 {
        for (g, &w) in grad.w1.iter_mut().zip(&params.w1) {
            *g += weight_decay * w;
        }
        for (g, &w) in grad.w2.iter_mut().zip(&params.w2) {
            *g += weight_decay * w;
        }
    }

    Ok((grad, loss_total * inv_batch))
}

/// Mean BCE of the network on `batch` in eval mode (no dropout, no decay).
pub fn evaluate_loss(params: &RankNetParams, batch: &[PairExample<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty {
            context: "loss over an empty batch".to_string(),
        });
    }
    let mut total = 0.0;
    for pair in batch {
        let s_i = score(params, pair.first, ScoreMode::Eval)?;
        let s_j = score(params, pair.second, ScoreMode::Eval)?;
        total += pair_bce(predict_pref(s_i, s_j), pair.target);
    }
    Ok(total / batch.len() as f64)
}

/// A trained scoring model: parameters plus the input standardization
/// fitted at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankNetModel {
    /// Artifact format version.
    pub version: u32,
    pub params: RankNetParams,
    pub standardizer: Standardizer,
    pub config: TrainConfig,
}

pub const MODEL_VERSION: u32 = 1;

impl RankNetModel {
    /// Score one embedding (eval mode, standardized with stored statistics).
    pub fn score_embedding(&self, embedding: &[f64]) -> Result<f64> {
        let normalized = self.standardizer.apply(embedding)?;
        score(&self.params, &normalized, ScoreMode::Eval)
    }

    /// Score every essay in the set; works on essays never seen in training
    /// as long as they carry embeddings of the trained dimension.
    pub fn score_all(&self, essay_set: &EssaySet) -> Result<ScoreTable> {
        essay_set.require_embeddings()?;
        let mut scores = Vec::with_capacity(essay_set.len());
        for essay in essay_set.essays() {
            let embedding = essay.embedding.as_ref().expect("checked above");
            scores.push(self.score_embedding(embedding)?);
        }
        ScoreTable::from_dense(essay_set, ScoreMethod::Ranknet, &scores)
    }

    /// Serialize to JSON on disk (atomic). Floats round-trip exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
        atomic_write(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: RankNetModel = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if model.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        model.params.check_shapes()?;
        Ok(model)
    }
}

/// Training output: the loss curve and the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-pair BCE of each epoch, in order.
    pub epoch_losses: Vec<f64>,
    /// Number of training pairs.
    pub pair_count: usize,
    pub model: RankNetModel,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64, t: i32) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let bias1 = 1.0 - BETA1.powi(t);
        let bias2 = 1.0 - BETA2.powi(t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

/// Train the scoring network on debiased pairwise records.
///
/// Every essay referenced by a record must carry an embedding; the
/// standardizer is fitted over all essays in the set. Each epoch shuffles
/// the records with a seeded generator and walks them in batches; dropout
/// masks are drawn fresh per pair per step and shared by the pair's two
/// forward passes. The whole procedure is deterministic for a fixed
/// (essays, records, config).
pub fn train(
    essay_set: &EssaySet,
    records: &[PairwiseRecord],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::Empty {
            context: "training over no pairwise records".to_string(),
        });
    }
    essay_set.require_embeddings()?;

    // standardize all embeddings once, up front
    let raw: Vec<&[f64]> = essay_set
        .essays()
        .iter()
        .map(|e| e.embedding.as_deref().expect("checked above"))
        .collect();
    let standardizer = Standardizer::fit(&raw)?;
    let inputs: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| standardizer.apply(row))
        .collect::<Result<_>>()?;

    // resolve records to essay positions
    let mut pairs = Vec::with_capacity(records.len());
    for (position, record) in records.iter().enumerate() {
        record.validate(position)?;
        pairs.push((
            essay_set.position(&record.i)?,
            essay_set.position(&record.j)?,
            record.c_tilde,
        ));
    }

    let d = essay_set
        .embedding_dim()
        .ok_or_else(|| Error::invalid("essay set has no embeddings".to_string()))?;
    let mut params = RankNetParams::init(d, cfg.hidden_units, cfg.seed);
    let mut shuffle_rng = rng_for_context(cfg.seed, &["ranknet-shuffle"]);
    let mut dropout_rng = rng_for_context(cfg.seed, &["ranknet-dropout"]);

    let mut adam_w1 = AdamState::new(params.w1.len());
    let mut adam_b1 = AdamState::new(params.b1.len());
    let mut adam_w2 = AdamState::new(params.w2.len());
    let mut adam_b2 = AdamState::new(1);
    let mut step = 0i32;

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        // Fisher–Yates with the persistent seeded stream
        for k in (1..order.len()).rev() {
            let pick = shuffle_rng.gen_range(0..=k);
            order.swap(k, pick);
        }

        let mut epoch_loss_sum = 0.0;
        for (batch_index, batch_ids) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<PairExample<'_>> = batch_ids
                .iter()
                .map(|&t| {
                    let (i, j, target) = pairs[t];
                    PairExample {
                        first: &inputs[i],
                        second: &inputs[j],
                        target,
                    }
                })
                .collect();

            let masks: Option<Vec<Vec<bool>>> = if cfg.dropout_rate > 0.0 {
                Some(
                    (0..batch.len())
                        .map(|_| {
                            (0..cfg.hidden_units)
                                .map(|_| dropout_rng.gen::<f64>() >= cfg.dropout_rate)
                                .collect()
                        })
                        .collect(),
                )
            } else {
                None
            };

            let (grad, batch_loss) = gradients(
                &params,
                &batch,
                cfg.weight_decay,
                masks.as_deref(),
                cfg.dropout_rate,
            )?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            epoch_loss_sum += batch_loss * batch.len() as f64;

            step += 1;
            adam_w1.update(&mut params.w1, &grad.w1, cfg.learning_rate, step);
            adam_b1.update(&mut params.b1, &grad.b1, cfg.learning_rate, step);
            adam_w2.update(&mut params.w2, &grad.w2, cfg.learning_rate, step);
            let mut b2 = [params.b2];
            adam_b2.update(&mut b2, &[grad.b2], cfg.learning_rate, step);
            params.b2 = b2[0];
        }
        let epoch_loss = epoch_loss_sum / pairs.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        epoch_losses.push(epoch_loss);
    }

    Ok(TrainReport {
        epoch_losses,
        pair_count: pairs.len(),
        model: RankNetModel {
            version: MODEL_VERSION,
            params,
            standardizer,
            config: cfg.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Essay;
    use crate::judge::debias;

    fn record(i: &str, j: &str, c_ij: f64, c_ji: f64) -> PairwiseRecord {
        PairwiseRecord {
            i: i.to_string(),
            j: j.to_string(),
            c_ij,
            c_ji,
            c_tilde: debias(c_ij, c_ji).unwrap(),
            judge_id: "t".to_string(),
            reasoning_fwd: None,
            reasoning_rev: None,
        }
    }

    #[test]
    fn score_zero_params_is_zero_and_eval_is_deterministic() {
        let params = RankNetParams::zeros(3, 4);
        let input = [0.5, -2.0, 7.0];
        assert_eq!(score(&params, &input, ScoreMode::Eval).unwrap(), 0.0);
        let a = score(&params, &input, ScoreMode::Eval).unwrap();
        let b = score(&params, &input, ScoreMode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn score_hand_network_oracle() {
        // W1 = identity(2), b1 = 0, w2 = (1,1), b2 = 0, input (1, −2):
        // hidden = relu(1, −2) = (1, 0) → output 1.
        let params = RankNetParams {
            d: 2,
            h: 2,
            w1: vec![1.0, 0.0, 0.0, 1.0],
            b1: vec![0.0, 0.0],
            w2: vec![1.0, 1.0],
            b2: 0.0,
        };
        assert_eq!(score(&params, &[1.0, -2.0], ScoreMode::Eval).unwrap(), 1.0);
    }

    #[test]
    fn score_dimension_mismatch_names_sizes() {
        let params = RankNetParams::zeros(3, 2);
        let err = score(&params, &[1.0, 2.0], ScoreMode::Eval).unwrap_err();
        match err {
            Error::DimensionMismatch {
                expected, actual, ..
            } => {
                assert_eq!((expected, actual), (3, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dropout_mask_zeroes_and_rescales() {
        let params = RankNetParams {
            d: 1,
            h: 2,
            w1: vec![1.0, 1.0],
            b1: vec![0.0, 0.0],
            w2: vec![1.0, 1.0],
            b2: 0.0,
        };
        // both hidden units = relu(2) = 2; keep only the first at rate 0.5 →
        // 2 / (1 − 0.5) = 4
        let mask = [true, false];
        let value = score(
            &params,
            &[2.0],
            ScoreMode::Train {
                mask: &mask,
                dropout_rate: 0.5,
            },
        )
        .unwrap();
        assert_eq!(value, 4.0);
    }

    #[test]
    fn predict_pref_analytic_values_and_antisymmetry() {
        assert_eq!(predict_pref(3.0, 3.0), 0.5);
        let p = predict_pref(3.0_f64.ln(), 0.0);
        assert!((p - 0.75).abs() < 1e-15, "σ(ln 3) = {p}");
        let mut rng = crate::seeding::rng_from_seed(2);
        for _ in 0..100 {
            // |difference| stays below ~36 so the sigmoid cannot saturate to
            // an exact 0.0 or 1.0 in double precision
            let a: f64 = rng.gen_range(-15.0..15.0);
            let b: f64 = rng.gen_range(-15.0..15.0);
            let fwd = predict_pref(a, b);
            let rev = predict_pref(b, a);
            assert!((fwd + rev - 1.0).abs() < 1e-12);
            assert!(fwd > 0.0 && fwd < 1.0);
        }
    }

    #[test]
    fn bce_analytic_oracles() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(&[0.5], &[0.5]).unwrap() - ln2).abs() < 1e-15);
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - ln2).abs() < 1e-15);
        // −(ln 0.9 + ln 0.9)/2 = −ln 0.9 ≈ 0.105360516
        let loss = bce_loss(&[0.9, 0.1], &[1.0, 0.0]).unwrap();
        assert!((loss - (-(0.9_f64.ln()))).abs() < 1e-15, "got {loss}");
        assert!((loss - 0.105_360_515_657_826_3).abs() < 1e-12);
    }

    #[test]
    fn bce_clamps_saturated_predictions() {
        let loss = bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(loss.is_finite());
        // the pred-1.0 side goes through 1 − (1 − 1e−12), which cancels to
        // 1e−12 only within ~1e−4 relative error, hence the loose tolerance
        let expected = -(PRED_CLAMP.ln());
        assert!((loss - expected).abs() < 1e-3, "got {loss}");
    }

    #[test]
    fn bce_minimized_at_target() {
        for &target in &[0.0f64, 0.5, 1.0] {
            let at_target = bce_loss(&[target.clamp(0.01, 0.99)], &[target]).unwrap();
            for &other in &[0.1, 0.3, 0.6, 0.9] {
                if (other - target).abs() > 0.05 {
                    assert!(
                        bce_loss(&[other], &[target]).unwrap() >= at_target,
                        "target {target}, pred {other}"
                    );
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // gradient correctness against central finite differences
    // ------------------------------------------------------------------
    fn objective(params: &RankNetParams, batch: &[PairExample<'_>], wd: f64) -> f64 {
        let bce = evaluate_loss(params, batch).unwrap();
        let l2: f64 = params.w1.iter().map(|w| w * w).sum::<f64>()
            + params.w2.iter().map(|w| w * w).sum::<f64>();
        bce + 0.5 * wd * l2
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let step = 1e-5;
        let mut rng = crate::seeding::rng_from_seed(11);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 10 && attempts < 1000 {
            attempts += 1;
            let d = rng.gen_range(2..=8);
            let h = rng.gen_range(2..=8);
            let mut params = RankNetParams::zeros(d, h);
            for w in params.w1.iter_mut().chain(params.w2.iter_mut()) {
                *w = rng.gen_range(-0.7..0.7);
            }
            for b in params.b1.iter_mut() {
                *b = rng.gen_range(-0.3..0.3);
            }
            params.b2 = rng.gen_range(-0.3..0.3);

            let n_pairs = rng.gen_range(1..=5);
            let data: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n_pairs)
                .map(|_| {
                    (
                        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        [0.0, 0.5, 1.0][rng.gen_range(0..3)],
                    )
                })
                .collect();
            let batch: Vec<PairExample<'_>> = data
                .iter()
                .map(|(a, b, t)| PairExample {
                    first: a,
                    second: b,
                    target: *t,
                })
                .collect();
            let wd = if rng.gen::<bool>() { 0.01 } else { 0.0 };

            // skip draws that put a pre-activation near the ReLU kink, where
            // finite differences are ill-defined
            let near_kink = batch.iter().any(|pair| {
                [pair.first, pair.second].iter().any(|input| {
                    (0..h).any(|k| {
                        let mut a = params.b1[k];
                        for (w, x) in params.w1[k * d..(k + 1) * d].iter().zip(*input) {
                            a += w * x;
                        }
                        a.abs() < 1e-3
                    })
                })
            });
            if near_kink {
                continue;
            }

            let (grad, _) = gradients(&params, &batch, wd, None, 0.0).unwrap();

            let check =
                |set: &dyn Fn(&mut RankNetParams, f64), base: f64, analytic: f64, what: &str| {
                    let mut plus = params.clone();
                    set(&mut plus, base + step);
                    let mut minus = params.clone();
                    set(&mut minus, base - step);
                    let fd = (objective(&plus, &batch, wd) - objective(&minus, &batch, wd))
                        / (2.0 * step);
                    let denom = analytic.abs().max(fd.abs()).max(1e-3);
                    assert!(
                    (analytic - fd).abs() / denom <= 1e-4,
                    "{what}: analytic {analytic} vs finite-difference {fd} (attempt {attempts})"
                );
                };

            for idx in 0..params.w1.len() {
                let base = params.w1[idx];
                check(&|p, v| p.w1[idx] = v, base, grad.w1[idx], "w1");
            }
            for idx in 0..params.b1.len() {
                let base = params.b1[idx];
                check(&|p, v| p.b1[idx] = v, base, grad.b1[idx], "b1");
            }
            for idx in 0..params.w2.len() {
                let base = params.w2[idx];
                check(&|p, v| p.w2[idx] = v, base, grad.w2[idx], "w2");
            }
            let base = params.b2;
            check(&|p, v| p.b2 = v, base, grad.b2, "b2");

            checked += 1;
        }
        assert_eq!(checked, 10, "could not find 10 kink-free draws");
    }

    #[test]
    fn b2_gradient_is_always_zero() {
        let mut rng = crate::seeding::rng_from_seed(19);
        for _ in 0..20 {
            let d = 3;
            let mut params = RankNetParams::zeros(d, 4);
            for w in params.w1.iter_mut().chain(params.w2.iter_mut()) {
                *w = rng.gen_range(-1.0..1.0);
            }
            let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let batch = [PairExample {
                first: &a,
                second: &b,
                target: 1.0,
            }];
            let (grad, _) = gradients(&params, &batch, 0.01, None, 0.0).unwrap();
            // b2 adds to both branch scores and cancels in their difference
            assert_eq!(grad.b2, 0.0);
        }
    }

    #[test]
    fn duplicate_pair_contributes_linearly() {
        let params = {
            let mut p = RankNetParams::zeros(2, 3);
            p.w1 = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.25];
            p.w2 = vec![0.7, -0.6, 0.2];
            p
        };
        let a = [0.4, -1.1];
        let b = [-0.3, 0.8];
        let single = [PairExample {
            first: &a,
            second: &b,
            target: 1.0,
        }];
        let double = [
            PairExample {
                first: &a,
                second: &b,
                target: 1.0,
            },
            PairExample {
                first: &a,
                second: &b,
                target: 1.0,
            },
        ];
        let (g1, l1) = gradients(&params, &single, 0.0, None, 0.0).unwrap();
        let (g2, l2) = gradients(&params, &double, 0.0, None, 0.0).unwrap();
        // mean over two identical pairs equals the single-pair mean
        assert_eq!(l1, l2);
        for (x, y) in g1.w1.iter().zip(&g2.w1) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in g1.w2.iter().zip(&g2.w2) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_params_loss_is_ln2_exactly() {
        let params = RankNetParams::zeros(2, 2);
        let a = [1.0, 2.0];
        let b = [-1.0, 0.5];
        for target in [0.0, 0.5, 1.0] {
            let batch = [PairExample {
                first: &a,
                second: &b,
                target,
            }];
            assert_eq!(
                evaluate_loss(&params, &batch).unwrap(),
                std::f64::consts::LN_2
            );
        }
        // two identical pairs: the mean of two equal values is still exact
        let batch = [
            PairExample {
                first: &a,
                second: &b,
                target: 1.0,
            },
            PairExample {
                first: &b,
                second: &a,
                target: 0.0,
            },
        ];
        assert_eq!(
            evaluate_loss(&params, &batch).unwrap(),
            std::f64::consts::LN_2
        );
    }

    fn embedded_set(golds: &[f64]) -> EssaySet {
        let essays: Vec<Essay> = golds
            .iter()
            .enumerate()
            .map(|(k, &g)| {
                Essay::new(format!("e{k:02}"), "p", format!("text {k}"))
                    .with_gold(g)
                    .with_embedding(vec![g, -2.0 * g, 0.5 + g])
            })
            .collect();
        EssaySet::new(essays).unwrap()
    }

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 64,
            hidden_units: 8,
            dropout_rate: 0.0,
            weight_decay: 0.0,
            seed,
        }
    }

    #[test]
    fn single_record_orders_the_two_essays() {
        let set = embedded_set(&[1.0, 2.0]);
        // e01 (gold 2) beats e00
        let records = vec![record("e01", "e00", 1.0, 0.0)];
        let report = train(&set, &records, &small_config(4)).unwrap();
        let table = report.model.score_all(&set).unwrap();
        assert!(table.get("e01").unwrap() > table.get("e00").unwrap());
        assert_eq!(report.pair_count, 1);
        assert!(report
            .epoch_losses
            .iter()
            .all(|l| l.is_finite() && *l >= 0.0));
        // loss should have decreased from the ln 2 neighborhood
        assert!(report.epoch_losses.last().unwrap() < report.epoch_losses.first().unwrap());
    }

    #[test]
    fn all_tie_targets_converge_to_ln2() {
        let set = embedded_set(&[1.0, 2.0, 3.0, 4.0]);
        let mut records = Vec::new();
        for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            records.push(record(&format!("e{i:02}"), &format!("e{j:02}"), 0.5, 0.5));
        }
        let mut cfg = small_config(7);
        cfg.epochs = 400;
        cfg.weight_decay = 0.01;
        let report = train(&set, &records, &cfg).unwrap();
        let last = *report.epoch_losses.last().unwrap();
        assert!(
            (last - std::f64::consts::LN_2).abs() < 1e-3,
            "final loss {last} should sit at the ln 2 optimum"
        );
    }

    #[test]
    fn same_seed_gives_bit_identical_reports() {
        let set = embedded_set(&[1.0, 3.0, 2.0, 5.0, 4.0]);
        let records = vec![
            record("e01", "e00", 1.0, 0.0),
            record("e03", "e02", 1.0, 0.0),
            record("e04", "e01", 1.0, 0.0),
            record("e00", "e02", 0.5, 0.5),
        ];
        let mut cfg = small_config(99);
        cfg.dropout_rate = 0.3; // exercise the mask stream too
        let a = train(&set, &records, &cfg).unwrap();
        let b = train(&set, &records, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let mut other = cfg.clone();
        other.seed = 100;
        let c = train(&set, &records, &other).unwrap();
        assert_ne!(a.model.params, c.model.params);
    }

    #[test]
    fn missing_embeddings_are_reported_by_id() {
        let essays = vec![
            Essay::new("a", "p", "x").with_embedding(vec![1.0]),
            Essay::new("b", "p", "y"),
        ];
        let set = EssaySet::new(essays).unwrap();
        let records = vec![record("a", "b", 1.0, 0.0)];
        let err = train(&set, &records, &small_config(1)).unwrap_err();
        assert!(
            err.to_string().contains('b'),
            "error should name the id: {err}"
        );
    }

    #[test]
    fn monotone_recovery_on_noiseless_full_pairing() {
        // embeddings linear in gold, every pair compared, no noise →
        // the learned ranking reproduces gold exactly
        let golds: Vec<f64> = (0..20).map(f64::from).collect();
        let set = embedded_set(&golds);
        let mut records = Vec::new();
        for i in 0..20 {
            for j in (i + 1)..20 {
                let (a, b) = (format!("e{i:02}"), format!("e{j:02}"));
                // j has the higher gold; present in varying order
                if (i + j) % 2 == 0 {
                    records.push(record(&b, &a, 1.0, 0.0));
                } else {
                    records.push(record(&a, &b, 0.0, 1.0));
                }
            }
        }
        let mut cfg = small_config(13);
        cfg.epochs = 300;
        cfg.hidden_units = 16;
        let report = train(&set, &records, &cfg).unwrap();
        let table = report.model.score_all(&set).unwrap();
        let rho = crate::metrics::spearman(&table.values(), &golds).unwrap();
        assert_eq!(rho, 1.0, "noiseless separable data must be fully recovered");
    }

    #[test]
    fn b2_shift_changes_no_prediction_or_ranking() {
        let set = embedded_set(&[2.0, 1.0, 4.0, 3.0]);
        let records = vec![
            record("e02", "e00", 1.0, 0.0),
            record("e00", "e01", 1.0, 0.0),
            record("e03", "e01", 1.0, 0.0),
        ];
        let report = train(&set, &records, &small_config(5)).unwrap();
        let mut shifted = report.model.clone();
        shifted.params.b2 += 123.456;

        let base_table = report.model.score_all(&set).unwrap();
        let shifted_table = shifted.score_all(&set).unwrap();
        for (x, y) in base_table.entries().iter().zip(shifted_table.entries()) {
            let fwd = predict_pref(x.1, base_table.values()[0]);
            let shifted_fwd = predict_pref(y.1, shifted_table.values()[0]);
            assert!((fwd - shifted_fwd).abs() < 1e-9);
        }
        assert_eq!(
            crate::convert::to_ranking(&base_table).unwrap(),
            crate::convert::to_ranking(&shifted_table).unwrap()
        );
    }

    #[test]
    fn scoring_is_a_pure_function_of_the_embedding() {
        let set = embedded_set(&[1.0, 2.0, 3.0]);
        let records = vec![
            record("e01", "e00", 1.0, 0.0),
            record("e02", "e01", 1.0, 0.0),
        ];
        let report = train(&set, &records, &small_config(21)).unwrap();
        // an unseen essay with an identical embedding gets an identical score
        let clone_embedding = set.get("e01").unwrap().embedding.clone().unwrap();
        let s_clone = report.model.score_embedding(&clone_embedding).unwrap();
        let table = report.model.score_all(&set).unwrap();
        assert_eq!(s_clone, table.get("e01").unwrap());
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let set = embedded_set(&[1.0, 2.0, 3.0]);
        let records = vec![
            record("e01", "e00", 1.0, 0.0),
            record("e02", "e00", 1.0, 0.0),
        ];
        let report = train(&set, &records, &small_config(8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        report.model.save(&path).unwrap();
        let loaded = RankNetModel::load(&path).unwrap();
        assert_eq!(loaded, report.model);
        // identical scores after reload, bit for bit
        assert_eq!(
            loaded.score_all(&set).unwrap(),
            report.model.score_all(&set).unwrap()
        );
    }

    #[test]
    fn standardizer_guards_constant_dimensions() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let standardizer = Standardizer::fit(&refs).unwrap();
        assert_eq!(standardizer.scale[1], 1.0);
        let out = standardizer.apply(&[2.0, 5.0]).unwrap();
        assert_eq!(out[1], 0.0);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn train_config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
        cfg.dropout_rate = 0.3;
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }
}
