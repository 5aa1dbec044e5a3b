//! Mini-batch Adam training with weighted cross-entropy and penalty hooks.
//!
//! The loss on a batch is
//!
//! ```text
//! sum_i w_i * CE_i / sum_i w_i  +  weight_decay * 0.5 * ||params||^2  +  penalty
//! ```
//!
//! where the weighted mean normalizes by the sum of weights so the loss scale
//! does not drift as reweighting schemes grow their weights. Gradients are
//! exact analytic derivatives of that expression; fairness penalties add
//! their own gradient through the feature layer via [`Penalty`].
//!
//! The learning rate follows a plateau schedule: when the epoch-mean training
//! loss fails to improve by at least `1e-4` (absolute) for `plateau_patience`
//! consecutive epochs, the rate is multiplied by `lr_decay_factor`. Training
//! always returns the last-epoch model; there is no early stopping.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mlp::{softmax, MlpModel};
use crate::rng::SeededRng;

/// Which label column a model is fit to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labels {
    Targets,
    Groups,
}

impl Labels {
    /// Resolves the label for one row; `Groups` requires the label present.
    pub fn of(self, ds: &Dataset, row: usize) -> Result<usize> {
        match self {
            Labels::Targets => Ok(ds.target(row)),
            Labels::Groups => ds.group(row).ok_or(Error::MissingGroup { row }),
        }
    }

    /// Size of the label space.
    pub fn cardinality(self, ds: &Dataset) -> usize {
        match self {
            Labels::Targets => ds.num_classes(),
            Labels::Groups => ds.num_groups(),
        }
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    /// Epochs without improvement before the learning rate decays.
    pub plateau_patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// Hidden width of the trained network; 0 disables the feature layer.
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-3,
            lr_decay_factor: 0.1,
            plateau_patience: 10,
            batch_size: 128,
            seed: 0,
            weight_decay: 0.0,
            hidden: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("lr must be positive".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(Error::InvalidConfig(
                "lr_decay_factor must lie in (0, 1)".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Rows a penalty sees alongside the feature matrix.
pub struct PenaltyBatch<'a> {
    pub ds: &'a Dataset,
    pub rows: &'a [usize],
}

/// A differentiable batch penalty on the feature representations.
pub trait Penalty {
    /// Returns the penalty value and its gradient with respect to the
    /// `n x feature_dim` feature matrix (flat row-major).
    fn eval(&self, features: &[f64], n: usize, dim: usize, batch: &PenaltyBatch) -> (f64, Vec<f64>);
}

/// Loss and exact gradient (flat layout) for one batch.
///
/// `weights` aligns with `rows` and must be non-negative with positive sum.
pub fn loss_and_grad(
    model: &MlpModel,
    ds: &Dataset,
    rows: &[usize],
    labels: &[usize],
    weights: &[f64],
    weight_decay: f64,
    penalty: Option<&dyn Penalty>,
) -> Result<(f64, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("loss over empty batch"));
    }
    if labels.len() != rows.len() || weights.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            what: "batch labels/weights",
            expected: rows.len(),
            got: labels.len().min(weights.len()),
        });
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidConfig(
            "example weights must be non-negative with positive sum".into(),
        ));
    }

    let n = rows.len();
    let d = model.input_dim();
    let fd = model.feature_dim();
    let k = model.output_dim();
    let hidden = model.hidden_dim();
    let (o1, o2, o3) = model.param_offsets();

    let mut grad = vec![0.0; model.param_count()];
    let mut loss = 0.0;

    // Forward pass for all rows, keeping features for the penalty hook.
    let mut features = vec![0.0; n * fd];
    let mut dlogits = vec![0.0; n * k];
    for (pos, &row) in rows.iter().enumerate() {
        let (logits, feats) = model.forward(ds.feature(row))?;
        features[pos * fd..(pos + 1) * fd].copy_from_slice(&feats);
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
        loss += weights[pos] * (lse - logits[labels[pos]]) / wsum;
        let probs = softmax(&logits);
        let scale = weights[pos] / wsum;
        for c in 0..k {
            let indicator = if c == labels[pos] { 1.0 } else { 0.0 };
            dlogits[pos * k + c] = (probs[c] - indicator) * scale;
        }
    }

    // Penalty value and its feature gradient.
    let mut dfeatures = vec![0.0; n * fd];
    if let Some(p) = penalty {
        let (value, grad_f) = p.eval(&features, n, fd, &PenaltyBatch { ds, rows });
        loss += value;
        dfeatures.copy_from_slice(&grad_f);
    }

    // Backprop: output layer, then the combined feature gradient through relu.
    let w2 = model.w2().to_vec();
    for (pos, &row) in rows.iter().enumerate() {
        let feats = &features[pos * fd..(pos + 1) * fd];
        for c in 0..k {
            let dl = dlogits[pos * k + c];
            if dl == 0.0 {
                continue;
            }
            let w2_row = c * fd;
            for j in 0..fd {
                grad[o2 + w2_row + j] += dl * feats[j];
                dfeatures[pos * fd + j] += dl * w2[w2_row + j];
            }
            grad[o3 + c] += dl;
        }
        if hidden > 0 {
            let x = ds.feature(row);
            for j in 0..hidden {
                // Relu gate: the stored feature is positive iff the unit fired.
                if feats[j] <= 0.0 {
                    continue;
                }
                let dpre = dfeatures[pos * fd + j];
                if dpre == 0.0 {
                    continue;
                }
                let w1_row = j * d;
                for i in 0..d {
                    grad[w1_row + i] += dpre * x[i];
                }
                grad[o1 + j] += dpre;
            }
        }
    }

    if weight_decay > 0.0 {
        let params = model.params_flat();
        let sq: f64 = params.iter().map(|p| p * p).sum();
        loss += weight_decay * 0.5 * sq;
        for (g, p) in grad.iter_mut().zip(&params) {
            *g += weight_decay * p;
        }
    }

    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0, loss });
    }
    Ok((loss, grad))
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const PLATEAU_TOLERANCE: f64 = 1e-4;

/// Stateful mini-batch trainer: seeded model, Adam moments, plateau schedule.
pub struct Trainer {
    model: MlpModel,
    config: TrainConfig,
    rng: SeededRng,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    lr: f64,
    best_loss: f64,
    stagnant: usize,
}

impl Trainer {
    pub fn new(input: usize, output: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let root = SeededRng::new(config.seed);
        let mut init_rng = root.derive("init");
        let model = MlpModel::new_seeded(input, config.hidden, output, &mut init_rng);
        let p = model.param_count();
        Ok(Self {
            model,
            config: config.clone(),
            rng: root.derive("epochs"),
            m: vec![0.0; p],
            v: vec![0.0; p],
            step: 0,
            lr: config.lr,
            best_loss: f64::INFINITY,
            stagnant: 0,
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn into_model(self) -> MlpModel {
        self.model
    }

    pub fn current_lr(&self) -> f64 {
        self.lr
    }

    /// One pass over `rows` in shuffled mini-batches; returns the epoch-mean
    /// loss and applies the plateau schedule.
    ///
    /// `weights` aligns with `rows`; `epoch` is diagnostic context only.
    pub fn run_epoch(
        &mut self,
        ds: &Dataset,
        rows: &[usize],
        labels: &[usize],
        weights: &[f64],
        penalty: Option<&dyn Penalty>,
        epoch: usize,
    ) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("epoch over no rows"));
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        self.rng.shuffle(&mut order);

        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch_rows: Vec<usize> = chunk.iter().map(|&i| rows[i]).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let batch_weights: Vec<f64> = chunk.iter().map(|&i| weights[i]).collect();
            let (loss, grad) = loss_and_grad(
                &self.model,
                ds,
                &batch_rows,
                &batch_labels,
                &batch_weights,
                self.config.weight_decay,
                penalty,
            )
            .map_err(|e| match e {
                Error::NonFiniteLoss { loss, .. } => Error::NonFiniteLoss { epoch, loss },
                other => other,
            })?;
            self.adam_step(&grad);
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        self.observe_epoch_loss(mean);
        Ok(mean)
    }

    fn adam_step(&mut self, grad: &[f64]) {
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - ADAM_BETA1.powf(t);
        let bias2 = 1.0 - ADAM_BETA2.powf(t);
        let mut params = self.model.params_flat();
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / bias1;
            let vhat = self.v[i] / bias2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
        self.model
            .set_params_flat(&params)
            .expect("parameter layout is fixed");
    }

    fn observe_epoch_loss(&mut self, loss: f64) {
        if loss < self.best_loss - PLATEAU_TOLERANCE {
            self.best_loss = loss;
            self.stagnant = 0;
        } else {
            self.stagnant += 1;
            if self.stagnant >= self.config.plateau_patience {
                self.lr *= self.config.lr_decay_factor;
                self.stagnant = 0;
            }
        }
    }
}

/// Trains a model on the given rows and label column with unit weights.
///
/// Deterministic in `config.seed`; returns the last-epoch model.
pub fn train(
    ds: &Dataset,
    rows: &[usize],
    labels: Labels,
    config: &TrainConfig,
    penalty: Option<&dyn Penalty>,
) -> Result<MlpModel> {
    let resolved: Vec<usize> = rows
        .iter()
        .map(|&row| labels.of(ds, row))
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("train over no rows"));
    }
    let mut trainer = Trainer::new(ds.dim(), labels.cardinality(ds), config)?;
    let weights = vec![1.0; rows.len()];
    for epoch in 0..config.epochs {
        trainer.run_epoch(ds, rows, &resolved, &weights, penalty, epoch)?;
    }
    Ok(trainer.into_model())
}
