//! Composite loss, a small correlation-feature predictor trained by manual
//! backpropagation, and the transformer parameter-count calculator.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::baselines::{ScoreKind, ScoreTensor};
use crate::container::{self, Kind};
use crate::corpus::{minmax_normalize, pad_instance, SeriesInstance};
use crate::rng::{self, stream};
use crate::stats::{auc_from_labels, lagged_crosscorr, normalize_cc_with, CcNormalization};
use crate::{par, Error, Result};

/// Predictions are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]` inside the
/// log terms of the edge loss.
pub const PRED_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda_edge: f64,
    pub lambda_corr: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_edge: 1.0, lambda_corr: 0.75, gamma: 2.0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_edge >= 0.0 && self.lambda_corr >= 0.0) {
            return Err(Error::config("loss weights must be non-negative"));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub edge: f64,
    pub corr: f64,
}

/// Mean binary cross-entropy over all cells (clamped predictions).
pub fn edge_bce(pred: &[f64], truth: &[f64]) -> f64 {
    let lo = PRED_CLAMP;
    let hi = 1.0 - PRED_CLAMP;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &y)| {
            let p = p.clamp(lo, hi);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    sum / pred.len() as f64
}

/// Mean of `(pred - cc)^2 * cc^gamma`.
pub fn corr_mse(pred: &[f64], cc: &[f64], gamma: f64) -> f64 {
    let sum: f64 = pred.iter().zip(cc).map(|(&p, &c)| (p - c).powi(2) * c.powf(gamma)).sum();
    sum / pred.len() as f64
}

/// Loss and its gradient with respect to every prediction, on flat slices.
pub fn loss_and_grad(pred: &[f64], truth: &[f64], cc: &[f64], cfg: &LossConfig, grad: &mut [f64]) -> LossParts {
    let n = pred.len() as f64;
    let lo = PRED_CLAMP;
    let hi = 1.0 - PRED_CLAMP;
    let edge = edge_bce(pred, truth);
    let corr = corr_mse(pred, cc, cfg.gamma);
    for (k, g) in grad.iter_mut().enumerate() {
        let (p, y, c) = (pred[k], truth[k], cc[k]);
        // The clamp is flat outside its range.
        let d_edge = if p > lo && p < hi { (p - y) / (p * (1.0 - p)) } else { 0.0 };
        let d_corr = 2.0 * (p - c) * c.powf(cfg.gamma);
        *g = (cfg.lambda_edge * d_edge + cfg.lambda_corr * d_corr) / n;
    }
    LossParts { total: cfg.lambda_edge * edge + cfg.lambda_corr * corr, edge, corr }
}

/// `lambda_edge * BCE + lambda_corr * weighted MSE` and its gradient.
pub fn composite_loss(
    pred: &Array3<f64>,
    truth: &Array3<u8>,
    cc: &Array3<f64>,
    cfg: &LossConfig,
) -> Result<(LossParts, Array3<f64>)> {
    if pred.dim() != truth.dim() || pred.dim() != cc.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?}, truth {:?}, correlation {:?}",
            pred.dim(),
            truth.dim(),
            cc.dim()
        )));
    }
    let p: Vec<f64> = pred.iter().copied().collect();
    let y: Vec<f64> = truth.iter().map(|&x| x as f64).collect();
    let c: Vec<f64> = cc.iter().copied().collect();
    let mut g = vec![0.0; p.len()];
    let parts = loss_and_grad(&p, &y, &c, cfg, &mut g);
    let grad = Array3::from_shape_vec(pred.dim(), g).expect("same size");
    Ok((parts, grad))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Number of local features [`cell_features`] produces per cell.
pub fn cell_feature_count(max_lag: usize) -> usize {
    7 + max_lag
}

/// Local view of every cell of a flat `(v_max, v_max, max_lag)` correlation
/// tensor, row-major `(cells, cell_feature_count)`.
///
/// Per cell: its own value, the reverse direction at the same slice, the
/// strongest other slice of the same pair, its own value minus that, the
/// strongest other cell with the same target, the strongest other cell with
/// the same source, a self-edge flag and a one-hot lag slice.
pub fn cell_features(x: &[f64], v_max: usize, max_lag: usize) -> Vec<f64> {
    let f = cell_feature_count(max_lag);
    let idx = |j: usize, i: usize, s: usize| (j * v_max + i) * max_lag + s;
    let mut out = vec![0.0; x.len() * f];
    for j in 0..v_max {
        for i in 0..v_max {
            for s in 0..max_lag {
                let k = idx(j, i, s);
                let c = x[k];
                let pair = (0..max_lag).filter(|&t| t != s).map(|t| x[idx(j, i, t)]).fold(0.0, f64::max);
                let mut target = 0.0f64;
                let mut source = 0.0f64;
                for o in 0..v_max {
                    for t in 0..max_lag {
                        if (o, t) != (i, s) {
                            target = target.max(x[idx(j, o, t)]);
                        }
                        if (o, t) != (j, s) {
                            source = source.max(x[idx(o, i, t)]);
                        }
                    }
                }
                let row = &mut out[k * f..(k + 1) * f];
                row[..7].copy_from_slice(&[c, x[idx(i, j, s)], pair, c - pair, target, source, (i == j) as u8 as f64]);
                row[7 + s] = 1.0;
            }
        }
    }
    out
}

/// Predictor mapping the `v_max^2 * max_lag` correlation features to as many
/// edge probabilities.
///
/// One tanh hidden layer, shared by all cells, reads each cell's
/// [`cell_features`]; the output logit adds a direct term on the cell's own
/// correlation. Sharing weights across cells keeps the model equivariant to
/// variable relabeling.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyPredictor {
    pub v_max: usize,
    pub max_lag: usize,
    pub hidden: usize,
    /// `(hidden, cell_feature_count)`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden` output weights.
    pub w2: Vec<f64>,
    /// Output bias (one value).
    pub b2: Vec<f64>,
    /// Weight of the direct term (one value).
    pub wd: Vec<f64>,
}

/// Gradients with the same layout as [`ToyPredictor`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub wd: Vec<f64>,
}

impl Grads {
    pub fn zeros(m: &ToyPredictor) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
            wd: vec![0.0; m.wd.len()],
        }
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.wd]
    }

    fn parts(&self) -> [&Vec<f64>; 5] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.wd]
    }

    fn add(&mut self, o: &Grads) {
        for (a, b) in self.parts_mut().into_iter().zip(o.parts()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, s: f64) {
        for v in self.parts_mut() {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn is_finite(&self) -> bool {
        self.parts().iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Intermediate values kept for backpropagation.
pub struct Activations {
    /// `(cells, cell_feature_count)`.
    pub features: Vec<f64>,
    /// `(cells, hidden)`.
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl ToyPredictor {
    pub fn cells(&self) -> usize {
        self.v_max * self.v_max * self.max_lag
    }

    pub fn features_per_cell(&self) -> usize {
        cell_feature_count(self.max_lag)
    }

    pub fn zeros(v_max: usize, max_lag: usize, hidden: usize) -> Self {
        let f = cell_feature_count(max_lag);
        Self {
            v_max,
            max_lag,
            hidden,
            w1: vec![0.0; hidden * f],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: vec![0.0],
            wd: vec![0.0],
        }
    }

    /// Glorot-uniform weights, zero biases and direct term.
    pub fn init(v_max: usize, max_lag: usize, hidden: usize, seed: u64) -> Self {
        let mut m = Self::zeros(v_max, max_lag, hidden);
        let f = m.features_per_cell();
        let mut rng = rng::child_rng(seed, stream::TRAINING, u64::MAX);
        let l1 = (6.0 / (f + hidden) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-l1..=l1));
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-l2..=l2));
        m
    }

    pub fn num_params(&self) -> usize {
        self.parts().iter().map(|v| v.len()).sum()
    }

    fn parts(&self) -> [&Vec<f64>; 5] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.wd]
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.wd]
    }

    pub fn forward(&self, x: &[f64]) -> Activations {
        let a = self.cells();
        let (h, f) = (self.hidden, self.features_per_cell());
        assert_eq!(x.len(), a, "input must have one value per cell");
        let features = cell_features(x, self.v_max, self.max_lag);
        let mut hidden = vec![0.0; a * h];
        let mut output = vec![0.0; a];
        for k in 0..a {
            let phi = &features[k * f..(k + 1) * f];
            let hk = &mut hidden[k * h..(k + 1) * h];
            for m in 0..h {
                let row = &self.w1[m * f..(m + 1) * f];
                hk[m] = (row.iter().zip(phi).map(|(w, v)| w * v).sum::<f64>() + self.b1[m]).tanh();
            }
            let z = self.w2.iter().zip(hk.iter()).map(|(w, v)| w * v).sum::<f64>() + self.b2[0] + self.wd[0] * x[k];
            output[k] = sigmoid(z);
        }
        Activations { features, hidden, output }
    }

    /// Accumulates parameter gradients given `dl_dp`, the loss gradient with
    /// respect to the sigmoid outputs.
    pub fn backward(&self, x: &[f64], act: &Activations, dl_dp: &[f64], grads: &mut Grads) {
        let (h, f) = (self.hidden, self.features_per_cell());
        for k in 0..self.cells() {
            let p = act.output[k];
            let dz = dl_dp[k] * p * (1.0 - p);
            if dz == 0.0 {
                continue;
            }
            grads.b2[0] += dz;
            grads.wd[0] += dz * x[k];
            let hk = &act.hidden[k * h..(k + 1) * h];
            let phi = &act.features[k * f..(k + 1) * f];
            for m in 0..h {
                grads.w2[m] += dz * hk[m];
                let dpre = dz * self.w2[m] * (1.0 - hk[m] * hk[m]);
                grads.b1[m] += dpre;
                grads.w1[m * f..(m + 1) * f].iter_mut().zip(phi).for_each(|(g, v)| *g += dpre * v);
            }
        }
    }

    /// Loss of one sample and its parameter gradients.
    pub fn sample_loss_grad(&self, s: &Sample, cfg: &LossConfig) -> (LossParts, Grads) {
        let act = self.forward(&s.features);
        let mut dl_dp = vec![0.0; act.output.len()];
        let parts = loss_and_grad(&act.output, &s.label, &s.cc, cfg, &mut dl_dp);
        let mut g = Grads::zeros(self);
        self.backward(&s.features, &act, &dl_dp, &mut g);
        (parts, g)
    }

    fn step(&mut self, g: &Grads, velocity: &mut Grads, lr: f64, momentum: f64) {
        for (p, (v, d)) in self.parts_mut().into_iter().zip(velocity.parts_mut().into_iter().zip(g.parts())) {
            for k in 0..p.len() {
                v[k] = momentum * v[k] - lr * d[k];
                p[k] += v[k];
            }
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut meta = Map::new();
        meta.insert("architecture".into(), Value::from("shared-cell-mlp"));
        meta.insert("v_max".into(), Value::from(self.v_max));
        meta.insert("max_lag".into(), Value::from(self.max_lag));
        meta.insert("hidden".into(), Value::from(self.hidden));
        meta.insert("activation".into(), Value::from("tanh"));
        let payload: Vec<f32> = self.parts().iter().flat_map(|v| v.iter().map(|&x| x as f32)).collect();
        container::encode(Kind::Checkpoint, meta, &[payload.len()], &payload)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let frame = container::decode(bytes, Kind::Checkpoint)?;
        let v_max: usize = container::meta_field(&frame.meta, "v_max")?;
        let max_lag: usize = container::meta_field(&frame.meta, "max_lag")?;
        let hidden: usize = container::meta_field(&frame.meta, "hidden")?;
        if v_max == 0 || max_lag == 0 || hidden == 0 {
            return Err(Error::Format("checkpoint dimensions must be positive".into()));
        }
        let mut m = Self::zeros(v_max, max_lag, hidden);
        if frame.payload.len() != m.num_params() {
            return Err(Error::Format(format!(
                "checkpoint holds {} weights, architecture needs {}",
                frame.payload.len(),
                m.num_params()
            )));
        }
        let mut it = frame.payload.iter().map(|&x| x as f64);
        for v in m.parts_mut() {
            v.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Fixed-size training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    /// Normalized lagged correlations, flattened `(v_max, v_max, max_lag)`.
    pub features: Vec<f64>,
    /// Padded ground truth as 0/1.
    pub label: Vec<f64>,
    /// Target of the correlation term; equal to `features`.
    pub cc: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Input pipeline shared by training and prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub v_max: usize,
    pub max_lag: usize,
    pub l_max: usize,
    pub cc_normalization: CcNormalization,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self { v_max: 12, max_lag: 3, l_max: 500, cc_normalization: CcNormalization::AbsMax }
    }
}

/// normalize -> pad -> lagged correlations of real variables -> normalize.
pub fn prepare(inst: &SeriesInstance, input: &InputConfig, pad_seed: u64) -> Result<Sample> {
    inst.validate()?;
    let normalized = SeriesInstance { series: minmax_normalize(&inst.series), ..inst.clone() };
    let padded = pad_instance(&normalized, input.l_max, input.v_max, input.max_lag, pad_seed)?;
    let v = inst.num_vars();
    let real = padded.series.slice(ndarray::s![.., ..v]).to_owned();
    let cc = lagged_crosscorr(&real, input.max_lag, input.v_max)?;
    let features: Vec<f64> = normalize_cc_with(&cc, input.cc_normalization).values.iter().copied().collect();
    Ok(Sample {
        id: inst.id.clone(),
        cc: features.clone(),
        features,
        label: padded.label.iter().map(|&x| x as f64).collect(),
        mask: padded.mask,
    })
}

/// Per-instance padding seed so predictions are reproducible.
pub fn pad_seed(seed: u64, id: &str) -> u64 {
    rng::derive(seed, stream::PADDING, container::hash64(id.as_bytes()))
}

/// Single forward pass producing a `(v_max, v_max, max_lag)` probability tensor.
pub fn predict(model: &ToyPredictor, inst: &SeriesInstance, l_max: usize, seed: u64) -> Result<ScoreTensor> {
    let input = InputConfig { v_max: model.v_max, max_lag: model.max_lag, l_max, ..InputConfig::default() };
    let s = prepare(inst, &input, pad_seed(seed, &inst.id))?;
    let out = model.forward(&s.features).output;
    let values = Array3::from_shape_vec((model.v_max, model.v_max, model.max_lag), out).expect("cells");
    ScoreTensor::new(values, ScoreKind::Probability)
}

/// Masked AUC of flat predictions; `None` when the truth is degenerate.
pub fn sample_auc(pred: &[f64], s: &Sample, v_max: usize, max_lag: usize) -> Option<f64> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for j in (0..v_max).filter(|&j| s.mask[j]) {
        for i in (0..v_max).filter(|&i| s.mask[i]) {
            for l in 0..max_lag {
                let k = (j * v_max + i) * max_lag + l;
                scores.push(pred[k]);
                labels.push(s.label[k] == 1.0);
            }
        }
    }
    auc_from_labels(&scores, &labels).ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub val_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 32, learning_rate: 0.5, momentum: 0.9, val_fraction: 0.1, patience: 5, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (best validation AUC).
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,val_auc")?;
        for r in &self.epochs {
            writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_auc)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Seeded train/validation split; returns `(train, validation)` indices.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::child_rng(seed, stream::TRAINING, 0));
    let mut n_val = (val_fraction * n as f64).round() as usize;
    if n >= 2 && val_fraction > 0.0 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = 0;
    }
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Mean loss and mean AUC of `model` on `samples`.
pub fn evaluate(model: &ToyPredictor, samples: &[&Sample], cfg: &LossConfig) -> (f64, f64) {
    let per = par::map_slice(samples, |s| {
        let out = model.forward(&s.features).output;
        let mut g = vec![0.0; out.len()];
        let loss = loss_and_grad(&out, &s.label, &s.cc, cfg, &mut g).total;
        (loss, sample_auc(&out, s, model.v_max, model.max_lag))
    });
    if per.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let loss = per.iter().map(|p| p.0).sum::<f64>() / per.len() as f64;
    let aucs: Vec<f64> = per.iter().filter_map(|p| p.1).collect();
    let auc = if aucs.is_empty() { f64::NAN } else { aucs.iter().sum::<f64>() / aucs.len() as f64 };
    (loss, auc)
}

/// Mini-batch SGD with momentum and early stopping on validation AUC.
///
/// Per-sample gradients within a batch are computed in parallel and summed
/// in sample order, so training is deterministic for a given seed.
pub fn train(
    samples: &[Sample],
    model: ToyPredictor,
    loss: &LossConfig,
    cfg: &TrainConfig,
) -> Result<(ToyPredictor, History)> {
    loss.validate()?;
    if samples.is_empty() {
        return Err(Error::config("training corpus is empty"));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::config("need batch_size >= 1, learning_rate > 0 and 0 <= momentum < 1"));
    }
    if let Some(s) = samples.iter().find(|s| s.features.len() != model.cells() || s.label.len() != model.cells()) {
        return Err(Error::Shape(format!("sample {} does not match the model's {} cells", s.id, model.cells())));
    }
    let mut history = History::default();
    if cfg.epochs == 0 {
        return Ok((model, history));
    }
    let (train_idx, val_idx) = split_indices(samples.len(), cfg.val_fraction, cfg.seed);
    let val_set: Vec<&Sample> = if val_idx.is_empty() {
        train_idx.iter().map(|&k| &samples[k]).collect()
    } else {
        val_idx.iter().map(|&k| &samples[k]).collect()
    };

    let mut model = model;
    let mut velocity = Grads::zeros(&model);
    let mut best: Option<(f64, usize, ToyPredictor)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        let mut order = train_idx.clone();
        let epoch_seed = rng::derive(cfg.seed, stream::TRAINING, epoch as u64);
        order.shuffle(&mut rng::rng_from(epoch_seed));
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let per = par::map_slice(batch, |&k| model.sample_loss_grad(&samples[k], loss));
            let mut grads = Grads::zeros(&model);
            let mut batch_loss = 0.0;
            for (parts, g) in &per {
                batch_loss += parts.total;
                grads.add(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, batch_seed: rng::derive(epoch_seed, stream::TRAINING, b as u64) });
            }
            loss_sum += batch_loss;
            model.step(&grads, &mut velocity, cfg.learning_rate, cfg.momentum);
        }
        let (val_loss, val_auc) = evaluate(&model, &val_set, loss);
        history.epochs.push(EpochRecord { epoch, train_loss: loss_sum / order.len() as f64, val_loss, val_auc });
        let score = if val_auc.is_nan() { -val_loss } else { val_auc };
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    let (_, epoch, kept) = best.expect("at least one epoch ran");
    history.best_epoch = Some(epoch);
    Ok((kept, history))
}

/// Hyperparameters of the transformer whose size is being counted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub blocks: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub kernel: usize,
    pub train_aids: bool,
    pub distil: bool,
    pub v_max: usize,
    pub max_lag: usize,
}

impl ArchConfig {
    /// Largest configuration (8 blocks, width 1024) at 25 variables and 3
    /// lags, with kernel 3 and both indicators on.
    pub fn large_25() -> Self {
        Self {
            blocks: 8,
            d_model: 1024,
            n_heads: 8,
            d_ff: 1024,
            kernel: 3,
            train_aids: true,
            distil: true,
            v_max: 25,
            max_lag: 3,
        }
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::large_25()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    /// Convolutional token embedding.
    pub embedding: u64,
    /// All encoder blocks.
    pub encoder: u64,
    /// Distillation layers between blocks.
    pub distil: u64,
    /// First feedforward layer of the head (includes the correlation inputs).
    pub head_input: u64,
    /// Output projection onto the `v_max^2 * max_lag` edge cells.
    pub head: u64,
    pub total: u64,
    /// Number of edge cells, `v_max^2 * max_lag`.
    pub cells: u64,
    pub notes: Vec<String>,
}

pub fn param_count(cfg: &ArchConfig) -> Result<ParamBreakdown> {
    if cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0 {
        return Err(Error::config(format!("d_model {} is not divisible by n_heads {}", cfg.d_model, cfg.n_heads)));
    }
    let d = cfg.d_model as u64;
    let ff = cfg.d_ff as u64;
    let k = cfg.kernel as u64;
    let b = cfg.blocks as u64;
    let cells = (cfg.v_max * cfg.v_max * cfg.max_lag) as u64;
    let embedding = d * cfg.v_max as u64 * k + d;
    let encoder = b * (4 * d * d + 2 * ff * d + ff + 9 * d);
    let distil = if cfg.distil { b.saturating_sub(1) * (d * d * k + 3 * d) } else { 0 };
    let head_input = (d + if cfg.train_aids { cells } else { 0 }) * ff + ff;
    let head = ff * cells + cells;
    let total = embedding + encoder + distil + head_input + head;
    let notes = vec![format!("assumed convolution kernel size k = {}", cfg.kernel)];
    Ok(ParamBreakdown { embedding, encoder, distil, head_input, head, total, cells, notes })
}

impl ParamBreakdown {
    /// Describes how far an advertised size is from the computed total, or
    /// `None` when they agree within `tolerance` (relative).
    pub fn nominal_mismatch(&self, nominal: u64, tolerance: f64) -> Option<String> {
        let rel = (self.total as f64 - nominal as f64) / nominal.max(1) as f64;
        if rel.abs() <= tolerance {
            return None;
        }
        let mut note =
            format!("nominal size {nominal} differs from the computed total {} by {:+.1}%", self.total, 100.0 * rel);
        if self.encoder > nominal {
            note.push_str(&format!("; the encoder term alone is {}", self.encoder));
        }
        Some(note)
    }
}

/// Writes a history CSV to `path`.
pub fn write_history(path: &Path, history: &History) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    history.write_csv(&mut f).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Stacks instances into samples in parallel.
pub fn prepare_all(instances: &[SeriesInstance], input: &InputConfig, seed: u64) -> Result<Vec<Sample>> {
    par::map_slice(instances, |inst| prepare(inst, input, pad_seed(seed, &inst.id))).into_iter().collect()
}

/// Reshapes a flat `(v_max, v_max, max_lag)` vector.
pub fn to_tensor(flat: &[f64], v_max: usize, max_lag: usize) -> Array3<f64> {
    Array3::from_shape_vec((v_max, v_max, max_lag), flat.to_vec()).expect("cell count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_half_is_ln2() {
        let p = vec![0.5; 12];
        let y: Vec<f64> = (0..12).map(|k| (k % 3 == 0) as u8 as f64).collect();
        assert!((edge_bce(&p, &y) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_hits_clamp_floor() {
        let y: Vec<f64> = (0..27).map(|k| (k % 4 == 0) as u8 as f64).collect();
        assert!(edge_bce(&y, &y) <= 2e-7);
    }

    #[test]
    fn zero_residual_correlation_loss() {
        let c: Vec<f64> = (0..8).map(|k| k as f64 / 8.0).collect();
        assert_eq!(corr_mse(&c, &c, 2.0), 0.0);
    }

    #[test]
    fn zero_weights_predict_half() {
        let m = ToyPredictor::zeros(3, 2, 4);
        assert!(m.forward(&vec![0.3; 18]).output.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Array3::zeros((2, 2, 1));
        let b = Array3::<u8>::zeros((2, 2, 2));
        assert!(composite_loss(&a, &b, &a, &LossConfig::default()).is_err());
        assert!(LossConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn head_term_of_large_config() {
        let p = param_count(&ArchConfig::large_25()).unwrap();
        assert_eq!(p.head, 1_921_875);
        assert_eq!(p.cells, 1875);
    }

    #[test]
    fn indicators_and_degenerate_blocks() {
        let base = ArchConfig::large_25();
        assert_eq!(param_count(&ArchConfig { distil: false, ..base }).unwrap().distil, 0);
        let p = param_count(&ArchConfig { blocks: 0, ..base }).unwrap();
        assert_eq!(p.encoder, 0);
        assert_eq!(p.distil, 0);
        assert_eq!(p.total, p.embedding + p.head_input + p.head);
        assert!(param_count(&ArchConfig { n_heads: 3, ..base }).is_err());
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (t, v) = split_indices(50, 0.1, 3);
        assert_eq!((t.len(), v.len()), (45, 5));
        assert_eq!(split_indices(50, 0.1, 3), (t.clone(), v.clone()));
        let mut all: Vec<_> = t.iter().chain(&v).copied().collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(split_indices(1, 0.1, 0).1.len(), 0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ToyPredictor::init(3, 2, 5, 7);
        let back = ToyPredictor::decode(&m.encode().unwrap()).unwrap();
        assert_eq!((back.v_max, back.max_lag, back.hidden), (3, 2, 5));
        assert!(back.w1.iter().zip(&m.w1).all(|(a, b)| *a == *b as f32 as f64));
    }
}
