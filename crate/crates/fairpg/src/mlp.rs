//! Two-layer softmax network used for both group and target classifiers.
//!
//! The network is `logits = W2 relu(W1 x + b1) + b2`, softmaxed into class
//! probabilities. With `hidden = 0` the feature layer is disabled and the
//! model is plain multinomial logistic regression on the raw inputs, which
//! gives a convex case for optimizer sanity checks. Parameters live in one
//! flat vector (`[w1, b1, w2, b2]`, row-major) so the optimizer and the
//! finite-difference tests can treat the model as a point in R^p.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Classifier;
use crate::rng::SeededRng;

/// Serialization format tag.
pub const MODEL_VERSION: &str = "mlp-v1";

/// A point on the probability simplex produced by a softmax classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPosterior {
    pub probs: Vec<f64>,
}

impl GroupPosterior {
    /// Largest probability; the classifier's confidence.
    pub fn confidence(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest probability; lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Lowest-index argmax over a slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax via max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Two-layer rectifier network with a softmax output head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input: usize,
    hidden: usize,
    output: usize,
    /// `hidden x input`, row-major; empty when `hidden == 0`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// `output x feature_dim`, row-major, where the feature dimension is
    /// `hidden`, or `input` when the feature layer is disabled.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl MlpModel {
    /// He-style seeded initialization: weights `N(0, sqrt(2 / fan_in))`,
    /// biases zero.
    pub fn new_seeded(input: usize, hidden: usize, output: usize, rng: &mut SeededRng) -> Self {
        let feature_dim = if hidden == 0 { input } else { hidden };
        let s1 = (2.0 / input as f64).sqrt();
        let s2 = (2.0 / feature_dim as f64).sqrt();
        let w1 = (0..hidden * input).map(|_| rng.normal() * s1).collect();
        let w2 = (0..output * feature_dim).map(|_| rng.normal() * s2).collect();
        Self {
            input,
            hidden,
            output,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    /// Width of the feature vector fed to the output layer.
    pub fn feature_dim(&self) -> usize {
        if self.hidden == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    /// Forward pass: returns `(logits, features)` where the features are the
    /// rectified hidden activations (or the input itself when the feature
    /// layer is disabled).
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input {
            return Err(Error::DimensionMismatch {
                what: "input",
                expected: self.input,
                got: x.len(),
            });
        }
        let features: Vec<f64> = if self.hidden == 0 {
            x.to_vec()
        } else {
            (0..self.hidden)
                .map(|j| {
                    let mut pre = self.b1[j];
                    let row = &self.w1[j * self.input..(j + 1) * self.input];
                    for (w, xi) in row.iter().zip(x) {
                        pre += w * xi;
                    }
                    pre.max(0.0)
                })
                .collect()
        };
        let fd = features.len();
        let logits = (0..self.output)
            .map(|c| {
                let mut l = self.b2[c];
                let row = &self.w2[c * fd..(c + 1) * fd];
                for (w, f) in row.iter().zip(&features) {
                    l += w * f;
                }
                l
            })
            .collect();
        Ok((logits, features))
    }

    /// Softmax of the logits.
    pub fn predict_posterior(&self, x: &[f64]) -> Result<GroupPosterior> {
        let (logits, _) = self.forward(x)?;
        Ok(GroupPosterior {
            probs: softmax(&logits),
        })
    }

    /// Predicted class index (lowest index wins ties).
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let (logits, _) = self.forward(x)?;
        Ok(argmax(&logits))
    }

    /// Total number of parameters in the flat layout.
    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters in the flat layout `[w1, b1, w2, b2]`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                what: "params",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let (w1, rest) = params.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
        Ok(())
    }

    /// Offsets of `(w1, b1, w2, b2)` inside the flat layout.
    pub(crate) fn param_offsets(&self) -> (usize, usize, usize) {
        let o1 = self.w1.len();
        let o2 = o1 + self.b1.len();
        let o3 = o2 + self.w2.len();
        (o1, o2, o3)
    }

    pub(crate) fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "version": MODEL_VERSION,
            "activation": "relu",
            "input": self.input,
            "hidden": self.hidden,
            "output": self.output,
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            version: String,
            activation: String,
            input: usize,
            hidden: usize,
            output: usize,
            w1: Vec<f64>,
            b1: Vec<f64>,
            w2: Vec<f64>,
            b2: Vec<f64>,
        }
        let file: File = serde_json::from_value(value.clone())?;
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model version {:?}",
                file.version
            )));
        }
        if file.activation != "relu" {
            return Err(Error::InvalidConfig(format!(
                "unsupported activation {:?}",
                file.activation
            )));
        }
        let feature_dim = if file.hidden == 0 { file.input } else { file.hidden };
        if file.w1.len() != file.hidden * file.input
            || file.b1.len() != file.hidden
            || file.w2.len() != file.output * feature_dim
            || file.b2.len() != file.output
        {
            return Err(Error::InvalidConfig("model array shapes inconsistent".into()));
        }
        Ok(Self {
            input: file.input,
            hidden: file.hidden,
            output: file.output,
            w1: file.w1,
            b1: file.b1,
            w2: file.w2,
            b2: file.b2,
        })
    }
}

impl Classifier for MlpModel {
    fn predict(&self, x: &[f64]) -> usize {
        let (logits, _) = self.forward(x).expect("input dimension mismatch");
        argmax(&logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(input: usize, hidden: usize, output: usize) -> MlpModel {
        let mut rng = SeededRng::new(0);
        let mut model = MlpModel::new_seeded(input, hidden, output, &mut rng);
        let zeros = vec![0.0; model.param_count()];
        model.set_params_flat(&zeros).unwrap();
        model
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let model = zero_model(3, 4, 5);
        let (logits, _) = model.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert!(logits.iter().all(|&l| l == 0.0));
        let post = model.predict_posterior(&[1.0, -2.0, 0.5]).unwrap();
        for p in &post.probs {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_like_network() {
        let mut model = zero_model(1, 1, 1);
        model.set_params_flat(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let (logits, features) = model.forward(&[2.0]).unwrap();
        assert_eq!(logits, vec![2.0]);
        assert_eq!(features, vec![2.0]);
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let mut rng = SeededRng::new(55);
        let (d, h, k) = (4, 6, 3);
        let model = MlpModel::new_seeded(d, h, k, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let (logits, features) = model.forward(&x).unwrap();

        // Independent matrix-product oracle over the flat layout.
        let params = model.params_flat();
        let w1 = &params[..h * d];
        let b1 = &params[h * d..h * d + h];
        let w2 = &params[h * d + h..h * d + h + k * h];
        let b2 = &params[h * d + h + k * h..];
        let mut feats = vec![0.0; h];
        for j in 0..h {
            let mut s = b1[j];
            for i in 0..d {
                s += w1[j * d + i] * x[i];
            }
            feats[j] = if s > 0.0 { s } else { 0.0 };
        }
        for j in 0..h {
            assert!((feats[j] - features[j]).abs() < 1e-15);
        }
        for c in 0..k {
            let mut s = b2[c];
            for j in 0..h {
                s += w2[c * h + j] * feats[j];
            }
            assert!((s - logits[c]).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_closed_forms() {
        let p = softmax(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        let p = softmax(&[3.0f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn softmax_stable_for_large_logits() {
        for logits in [[500.0, -500.0], [-500.0, -500.0], [500.0, 500.0]] {
            let p = softmax(&logits);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v) && v.is_finite()));
        }
    }

    #[test]
    fn posterior_sums_to_one() {
        let mut rng = SeededRng::new(91);
        let model = MlpModel::new_seeded(5, 8, 4, &mut rng);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.normal() * 3.0).collect();
            let post = model.predict_posterior(&x).unwrap();
            let sum: f64 = post.probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let model = zero_model(3, 2, 2);
        assert!(model.forward(&[1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = SeededRng::new(5);
        let model = MlpModel::new_seeded(3, 4, 2, &mut rng);
        let json = model.to_json();
        assert_eq!(json["version"], MODEL_VERSION);
        let back = MlpModel::from_json(&json).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn logistic_mode_has_no_hidden_params() {
        let mut rng = SeededRng::new(6);
        let model = MlpModel::new_seeded(3, 0, 2, &mut rng);
        assert_eq!(model.feature_dim(), 3);
        assert_eq!(model.param_count(), 2 * 3 + 2);
        let (logits, features) = model.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(features, vec![1.0, 2.0, 3.0]);
        assert_eq!(logits.len(), 2);
    }
}
