//! Fairness-aware trainers over a (possibly pseudo-)group-labeled dataset.
//!
//! All trainers fit the target labels; they differ in how the group labels
//! enter the objective:
//!
//! - [`train_scratch`]: plain weighted cross-entropy, groups ignored;
//! - [`train_lbc`]: periodic multiplicative reweighting of (group, class)
//!   cells driven by their accuracy deficit against the class mean;
//! - [`train_fairhsic`]: adds an HSIC penalty between batch features and
//!   group one-hots (median bandwidth per batch);
//! - [`train_mfd`]: adds an MMD distillation penalty matching each
//!   (group, class) cell's student features to a frozen teacher's features
//!   for that class (bandwidth fixed from the teacher's features).
//!
//! With zero penalty strength every trainer reproduces `train_scratch`
//! bit for bit under a shared seed. [`select_model`] implements the
//! accuracy-floor rule used to pick a hyperparameter from a grid.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{hsic_with_bandwidth, median_bandwidth, mmd2_with_grad_a};
use crate::metrics::{accuracy_table, FairnessReport};
use crate::mlp::MlpModel;
use crate::train::{train, Labels, Penalty, PenaltyBatch, TrainConfig, Trainer};

/// Which fairness-aware trainer to run, with its strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerSpec {
    Scratch,
    Lbc { alpha: f64, eval_period_epochs: usize },
    FairHsic { lambda: f64 },
    Mfd { lambda: f64 },
}

impl TrainerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrainerSpec::Scratch => Ok(()),
            TrainerSpec::Lbc {
                alpha,
                eval_period_epochs,
            } => {
                if !(alpha >= 0.0) {
                    return Err(Error::InvalidConfig("lbc alpha must be >= 0".into()));
                }
                if eval_period_epochs < 1 {
                    return Err(Error::InvalidConfig("lbc eval period must be >= 1".into()));
                }
                Ok(())
            }
            TrainerSpec::FairHsic { lambda } | TrainerSpec::Mfd { lambda } => {
                if !(lambda >= 0.0) {
                    return Err(Error::InvalidConfig("penalty strength must be >= 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Hyperparameter strength used by the model-selection tie break.
    pub fn strength(&self) -> f64 {
        match *self {
            TrainerSpec::Scratch => 0.0,
            TrainerSpec::Lbc { alpha, .. } => alpha,
            TrainerSpec::FairHsic { lambda } | TrainerSpec::Mfd { lambda } => lambda,
        }
    }

    /// Trainer family name, stable across hyperparameters.
    pub fn family(&self) -> &'static str {
        match self {
            TrainerSpec::Scratch => "scratch",
            TrainerSpec::Lbc { .. } => "lbc",
            TrainerSpec::FairHsic { .. } => "fair_hsic",
            TrainerSpec::Mfd { .. } => "mfd",
        }
    }
}

/// Periodic reweighting interval the reweighting trainer defaults to.
pub const LBC_DEFAULT_EVAL_PERIOD: usize = 5;

/// Default hyperparameter grids for each trainer family.
pub fn default_grid(family: &str) -> Vec<f64> {
    match family {
        "mfd" => vec![
            10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0, 30000.0,
        ],
        "fair_hsic" => vec![1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0],
        "lbc" => vec![1.0, 3.0, 10.0, 30.0, 100.0],
        _ => vec![0.0],
    }
}

/// Per-example weights, kept non-negative with mean one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleWeights {
    w: Vec<f64>,
}

impl ExampleWeights {
    /// Normalizes raw non-negative weights to mean one.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput("no example weights"));
        }
        if raw.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidConfig(
                "example weights must be finite and non-negative".into(),
            ));
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if !(mean > 0.0) {
            return Err(Error::InvalidConfig(
                "example weights must have positive mean".into(),
            ));
        }
        Ok(Self {
            w: raw.into_iter().map(|w| w / mean).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn mean(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }
}

fn require_groups(ds: &Dataset, rows: &[usize]) -> Result<Vec<usize>> {
    rows.iter()
        .map(|&row| ds.group(row).ok_or(Error::MissingGroup { row }))
        .collect()
}

/// Vanilla training on the target labels; group labels are ignored.
pub fn train_scratch(ds: &Dataset, rows: &[usize], config: &TrainConfig) -> Result<MlpModel> {
    train(ds, rows, Labels::Targets, config, None)
}

/// Reweighting trainer: every `eval_period_epochs` epochs, each
/// (group, class) cell's weight is multiplied by
/// `exp(alpha * (class mean accuracy - cell accuracy))`, computed on the
/// training rows, and the per-example weights are renormalized to mean one.
pub fn train_lbc(
    ds: &Dataset,
    rows: &[usize],
    alpha: f64,
    eval_period_epochs: usize,
    config: &TrainConfig,
) -> Result<MlpModel> {
    TrainerSpec::Lbc {
        alpha,
        eval_period_epochs,
    }
    .validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("train over no rows"));
    }
    let groups = require_groups(ds, rows)?;
    let labels: Vec<usize> = rows.iter().map(|&r| ds.target(r)).collect();
    let n_groups = ds.num_groups();
    let m = ds.num_classes();

    let mut cell_weights = vec![vec![1.0f64; m]; n_groups];
    let mut trainer = Trainer::new(ds.dim(), m, config)?;
    for epoch in 0..config.epochs {
        let raw: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, _)| cell_weights[groups[i]][labels[i]])
            .collect();
        let weights = ExampleWeights::normalized(raw)?;
        trainer.run_epoch(ds, rows, &labels, weights.as_slice(), None, epoch)?;

        let completed = epoch + 1;
        if alpha > 0.0 && completed % eval_period_epochs == 0 && completed < config.epochs {
            let mut preds = vec![0usize; ds.len()];
            for &row in rows {
                preds[row] = trainer.model().predict_class(ds.feature(row))?;
            }
            let table = accuracy_table(&preds, ds, rows)?;
            for y in 0..m {
                let supported: Vec<usize> =
                    (0..n_groups).filter(|&a| table.is_supported(a, y)).collect();
                if supported.len() < 2 {
                    continue;
                }
                let mean =
                    supported.iter().map(|&a| table.acc[a][y]).sum::<f64>() / supported.len() as f64;
                for &a in &supported {
                    cell_weights[a][y] *= (alpha * (mean - table.acc[a][y])).exp();
                    if !cell_weights[a][y].is_finite() {
                        return Err(Error::InvalidConfig(format!(
                            "lbc weight for cell ({a},{y}) became non-finite at epoch {epoch}"
                        )));
                    }
                }
            }
        }
    }
    Ok(trainer.into_model())
}

/// Bandwidth selection for the HSIC penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median heuristic, recomputed from each batch's features.
    Median,
    /// Fixed value (used by the gradient checks).
    Fixed(f64),
}

/// HSIC between batch features and group one-hots, scaled by `lambda`.
///
/// The bandwidth is treated as a constant when differentiating. Batches
/// smaller than four rows skip the penalty.
pub struct HsicPenalty {
    pub lambda: f64,
    pub bandwidth: Bandwidth,
}

impl Penalty for HsicPenalty {
    fn eval(&self, features: &[f64], n: usize, dim: usize, batch: &PenaltyBatch) -> (f64, Vec<f64>) {
        if n < 4 || self.lambda == 0.0 {
            return (0.0, vec![0.0; n * dim]);
        }
        let groups: Vec<usize> = batch
            .rows
            .iter()
            .map(|&row| batch.ds.group(row).expect("penalized rows carry groups"))
            .collect();
        let sigma = match self.bandwidth {
            Bandwidth::Median => median_bandwidth(features, n, dim),
            Bandwidth::Fixed(s) => s,
        };
        let (value, mut grad) = hsic_with_bandwidth(features, n, dim, &groups, sigma)
            .expect("batch size checked above");
        for g in &mut grad {
            *g *= self.lambda;
        }
        (self.lambda * value, grad)
    }
}

/// Trains with an HSIC penalty tying features to group labels.
pub fn train_fairhsic(
    ds: &Dataset,
    rows: &[usize],
    lambda: f64,
    config: &TrainConfig,
) -> Result<MlpModel> {
    TrainerSpec::FairHsic { lambda }.validate()?;
    require_groups(ds, rows)?;
    if lambda == 0.0 {
        return train_scratch(ds, rows, config);
    }
    let penalty = HsicPenalty {
        lambda,
        bandwidth: Bandwidth::Median,
    };
    train(ds, rows, Labels::Targets, config, Some(&penalty))
}

/// MMD distillation penalty: for each class in the batch, every group cell's
/// student features are pulled toward the teacher's features for that class.
pub struct MfdPenalty<'a> {
    pub lambda: f64,
    pub teacher: &'a MlpModel,
    /// Bandwidth fixed from the teacher's features over the training rows.
    pub bandwidth: f64,
}

impl<'a> MfdPenalty<'a> {
    /// Computes the bandwidth from teacher features on (a deterministic cap
    /// of) the training rows.
    pub fn new(
        lambda: f64,
        teacher: &'a MlpModel,
        ds: &Dataset,
        rows: &[usize],
    ) -> Result<Self> {
        const BANDWIDTH_ROW_CAP: usize = 2048;
        let take = rows.len().min(BANDWIDTH_ROW_CAP);
        let dim = teacher.feature_dim();
        let mut feats = Vec::with_capacity(take * dim);
        for &row in &rows[..take] {
            let (_, f) = teacher.forward(ds.feature(row))?;
            feats.extend_from_slice(&f);
        }
        Ok(Self {
            lambda,
            teacher,
            bandwidth: median_bandwidth(&feats, take, dim),
        })
    }
}

impl Penalty for MfdPenalty<'_> {
    fn eval(&self, features: &[f64], n: usize, dim: usize, batch: &PenaltyBatch) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; n * dim];
        if self.lambda == 0.0 || n == 0 {
            return (0.0, grad);
        }
        let ds = batch.ds;
        let teacher_dim = self.teacher.feature_dim();
        // Teacher features for the whole batch (frozen).
        let mut teacher_feats = vec![0.0; n * teacher_dim];
        for (pos, &row) in batch.rows.iter().enumerate() {
            let (_, f) = self
                .teacher
                .forward(ds.feature(row))
                .expect("teacher input dims match dataset");
            teacher_feats[pos * teacher_dim..(pos + 1) * teacher_dim].copy_from_slice(&f);
        }

        let mut value = 0.0;
        for y in 0..ds.num_classes() {
            let class_pos: Vec<usize> = (0..n)
                .filter(|&p| ds.target(batch.rows[p]) == y)
                .collect();
            if class_pos.is_empty() {
                continue;
            }
            let mut class_teacher = Vec::with_capacity(class_pos.len() * teacher_dim);
            for &p in &class_pos {
                class_teacher
                    .extend_from_slice(&teacher_feats[p * teacher_dim..(p + 1) * teacher_dim]);
            }
            for a in 0..ds.num_groups() {
                let cell_pos: Vec<usize> = class_pos
                    .iter()
                    .copied()
                    .filter(|&p| ds.group(batch.rows[p]).expect("penalized rows carry groups") == a)
                    .collect();
                if cell_pos.is_empty() {
                    continue;
                }
                let mut cell_student = Vec::with_capacity(cell_pos.len() * dim);
                for &p in &cell_pos {
                    cell_student.extend_from_slice(&features[p * dim..(p + 1) * dim]);
                }
                let (v, g) = mmd2_with_grad_a(
                    &cell_student,
                    cell_pos.len(),
                    &class_teacher,
                    class_pos.len(),
                    dim,
                    self.bandwidth,
                )
                .expect("cell is non-empty");
                value += self.lambda * v;
                for (slot, &p) in cell_pos.iter().enumerate() {
                    for t in 0..dim {
                        grad[p * dim + t] += self.lambda * g[slot * dim + t];
                    }
                }
            }
        }
        (value, grad)
    }
}

/// Trains with the MMD distillation penalty against a frozen teacher.
///
/// The teacher is usually a scratch model on the full training targets; its
/// feature width must match the student's (`config.hidden`).
pub fn train_mfd(
    ds: &Dataset,
    rows: &[usize],
    lambda: f64,
    teacher: &MlpModel,
    config: &TrainConfig,
) -> Result<MlpModel> {
    TrainerSpec::Mfd { lambda }.validate()?;
    require_groups(ds, rows)?;
    if lambda == 0.0 {
        return train_scratch(ds, rows, config);
    }
    let student_feature_dim = if config.hidden == 0 {
        ds.dim()
    } else {
        config.hidden
    };
    if teacher.feature_dim() != student_feature_dim {
        return Err(Error::DimensionMismatch {
            what: "teacher feature width",
            expected: student_feature_dim,
            got: teacher.feature_dim(),
        });
    }
    let penalty = MfdPenalty::new(lambda, teacher, ds, rows)?;
    train(ds, rows, Labels::Targets, config, Some(&penalty))
}

/// Dispatches to the trainer named by `spec`; `teacher` is required for the
/// distillation trainer.
pub fn train_fair(
    ds: &Dataset,
    rows: &[usize],
    spec: &TrainerSpec,
    teacher: Option<&MlpModel>,
    config: &TrainConfig,
) -> Result<MlpModel> {
    spec.validate()?;
    match *spec {
        TrainerSpec::Scratch => train_scratch(ds, rows, config),
        TrainerSpec::Lbc {
            alpha,
            eval_period_epochs,
        } => train_lbc(ds, rows, alpha, eval_period_epochs, config),
        TrainerSpec::FairHsic { lambda } => train_fairhsic(ds, rows, lambda, config),
        TrainerSpec::Mfd { lambda } => {
            let teacher = teacher.ok_or_else(|| {
                Error::InvalidConfig("mfd requires a teacher model".into())
            })?;
            train_mfd(ds, rows, lambda, teacher, config)
        }
    }
}

/// One grid point offered to the model-selection rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCandidate {
    /// Hyperparameter strength (0 for scratch).
    pub strength: f64,
    pub report: FairnessReport,
}

/// Accuracy-floor model selection.
///
/// Among candidates with accuracy at least `floor * scratch_accuracy`,
/// returns the one with the smallest max-disparity, ties broken by smaller
/// strength, then higher accuracy. When none qualifies, returns the highest
/// accuracy, ties broken by smaller strength, then smaller disparity. The
/// outcome does not depend on the candidate order.
pub fn select_model(
    candidates: &[SelectionCandidate],
    scratch_accuracy: f64,
    floor: f64,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("no selection candidates"));
    }
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::InvalidConfig("accuracy floor must lie in (0, 1]".into()));
    }
    let bar = floor * scratch_accuracy;
    let qualifying: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].report.accuracy >= bar)
        .collect();

    let pick = |indices: &[usize], key: &dyn Fn(&SelectionCandidate) -> (f64, f64, f64)| {
        *indices
            .iter()
            .min_by(|&&a, &&b| {
                let ka = key(&candidates[a]);
                let kb = key(&candidates[b]);
                ka.partial_cmp(&kb).expect("finite selection keys")
            })
            .expect("non-empty index list")
    };

    Ok(if qualifying.is_empty() {
        let all: Vec<usize> = (0..candidates.len()).collect();
        pick(&all, &|c| (-c.report.accuracy, c.strength, c.report.delta_m))
    } else {
        pick(&qualifying, &|c| {
            (c.report.delta_m, c.strength, -c.report.accuracy)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::argmax;
    use crate::rng::SeededRng;
    use crate::train::loss_and_grad;

    /// Balanced two-group, two-class blobs with a controllable group gap:
    /// group 1's clusters are shifted toward the opposite class.
    fn gapped_dataset(n: usize, shift: f64, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let mut features = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.index(2);
            let y = rng.index(2);
            let center = if y == 0 { -2.0 } else { 2.0 };
            let toward_other = if y == 0 { shift } else { -shift };
            let x0 = center + if a == 1 { toward_other } else { 0.0 } + rng.normal();
            let x1 = if a == 0 { -1.0 } else { 1.0 } + rng.normal() * 0.5;
            features.push(vec![x0, x1]);
            targets.push(y);
            groups.push(Some(a));
        }
        Dataset::new(features, targets, groups, 2, 2).unwrap()
    }

    fn quick_config(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 20,
            lr: 0.01,
            hidden: 8,
            batch_size: 64,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn scratch_equals_plain_train() {
        let ds = gapped_dataset(100, 0.0, 1);
        let cfg = quick_config(3);
        let a = train_scratch(&ds, &ds.all_rows(), &cfg).unwrap();
        let b = train(&ds, &ds.all_rows(), Labels::Targets, &cfg, None).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
    }

    #[test]
    fn zero_strength_trainers_reproduce_scratch_bitwise() {
        let ds = gapped_dataset(120, 1.0, 2);
        let cfg = quick_config(4);
        let rows = ds.all_rows();
        let scratch = train_scratch(&ds, &rows, &cfg).unwrap();

        let lbc = train_lbc(&ds, &rows, 0.0, 5, &cfg).unwrap();
        assert_eq!(scratch.params_flat(), lbc.params_flat());

        let hsic = train_fairhsic(&ds, &rows, 0.0, &cfg).unwrap();
        assert_eq!(scratch.params_flat(), hsic.params_flat());

        let teacher = scratch.clone();
        let mfd = train_mfd(&ds, &rows, 0.0, &teacher, &cfg).unwrap();
        assert_eq!(scratch.params_flat(), mfd.params_flat());
    }

    #[test]
    fn lbc_raises_weight_of_lagging_cell() {
        // Directly exercise the update formula on a fixed accuracy table.
        let alpha = 10.0f64;
        let acc = [[0.9f64, 0.8], [0.5, 0.8]];
        let mean0 = (0.9 + 0.5) / 2.0;
        let lagging = (alpha * (mean0 - acc[1][0])).exp();
        let leading = (alpha * (mean0 - acc[0][0])).exp();
        assert!(lagging > 1.0);
        assert!(leading < 1.0);
    }

    #[test]
    fn lbc_weights_stay_mean_one() {
        let raw = vec![0.5, 2.0, 4.0, 1.5];
        let w = ExampleWeights::normalized(raw).unwrap();
        assert!((w.mean() - 1.0).abs() < 1e-9);
        assert!(w.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn hsic_penalty_gradient_through_network() {
        // Full finite-difference check of CE + HSIC with a pinned bandwidth.
        let ds = gapped_dataset(12, 1.0, 7);
        let rows = ds.all_rows();
        let labels: Vec<usize> = rows.iter().map(|&r| ds.target(r)).collect();
        let weights = vec![1.0; rows.len()];
        let mut rng = SeededRng::new(9);
        let model = MlpModel::new_seeded(2, 4, 2, &mut rng);
        let penalty = HsicPenalty {
            lambda: 5.0,
            bandwidth: Bandwidth::Fixed(1.1),
        };
        let (_, grad) =
            loss_and_grad(&model, &ds, &rows, &labels, &weights, 0.0, Some(&penalty)).unwrap();
        let params = model.params_flat();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p[i] += delta;
                let mut m = model.clone();
                m.set_params_flat(&p).unwrap();
                loss_and_grad(&m, &ds, &rows, &labels, &weights, 0.0, Some(&penalty))
                    .unwrap()
                    .0
            };
            let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((grad[i] - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "rel err {worst}");
    }

    #[test]
    fn mfd_penalty_gradient_through_network() {
        let ds = gapped_dataset(10, 1.0, 11);
        let rows = ds.all_rows();
        let labels: Vec<usize> = rows.iter().map(|&r| ds.target(r)).collect();
        let weights = vec![1.0; rows.len()];
        let mut rng = SeededRng::new(13);
        let teacher = MlpModel::new_seeded(2, 4, 2, &mut rng);
        let model = MlpModel::new_seeded(2, 4, 2, &mut rng);
        let penalty = MfdPenalty {
            lambda: 3.0,
            teacher: &teacher,
            bandwidth: 0.9,
        };
        let (_, grad) =
            loss_and_grad(&model, &ds, &rows, &labels, &weights, 0.0, Some(&penalty)).unwrap();
        let params = model.params_flat();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p[i] += delta;
                let mut m = model.clone();
                m.set_params_flat(&p).unwrap();
                loss_and_grad(&m, &ds, &rows, &labels, &weights, 0.0, Some(&penalty))
                    .unwrap()
                    .0
            };
            let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((grad[i] - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "rel err {worst}");
    }

    #[test]
    fn mfd_initial_penalty_matches_direct_sum() {
        // Student sharing the teacher's parameters: the penalty at the start
        // equals the direct per-cell discrepancy of the teacher's features.
        let ds = gapped_dataset(40, 1.5, 17);
        let rows = ds.all_rows();
        let mut rng = SeededRng::new(19);
        let teacher = MlpModel::new_seeded(2, 6, 2, &mut rng);
        let penalty = MfdPenalty::new(1.0, &teacher, &ds, &rows).unwrap();

        let dim = teacher.feature_dim();
        let mut feats = vec![0.0; rows.len() * dim];
        for (pos, &row) in rows.iter().enumerate() {
            let (_, f) = teacher.forward(ds.feature(row)).unwrap();
            feats[pos * dim..(pos + 1) * dim].copy_from_slice(&f);
        }
        let (value, _) = penalty.eval(
            &feats,
            rows.len(),
            dim,
            &PenaltyBatch { ds: &ds, rows: &rows },
        );

        // Direct recomputation from the estimator.
        let mut expected = 0.0;
        for y in 0..2 {
            let class: Vec<usize> = (0..rows.len()).filter(|&p| ds.target(p) == y).collect();
            if class.is_empty() {
                continue;
            }
            let gather = |ps: &[usize]| {
                let mut out = Vec::with_capacity(ps.len() * dim);
                for &p in ps {
                    out.extend_from_slice(&feats[p * dim..(p + 1) * dim]);
                }
                out
            };
            let class_feats = gather(&class);
            for a in 0..2 {
                let cell: Vec<usize> = class
                    .iter()
                    .copied()
                    .filter(|&p| ds.group(p) == Some(a))
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let cell_feats = gather(&cell);
                expected += crate::kernels::mmd2(
                    &cell_feats,
                    cell.len(),
                    &class_feats,
                    class.len(),
                    dim,
                    penalty.bandwidth,
                )
                .unwrap();
            }
        }
        assert!((value - expected).abs() < 1e-12);
    }

    #[test]
    fn mfd_rejects_mismatched_teacher() {
        let ds = gapped_dataset(20, 0.0, 23);
        let mut rng = SeededRng::new(3);
        let teacher = MlpModel::new_seeded(2, 16, 2, &mut rng);
        let cfg = quick_config(1); // hidden 8 != teacher feature width 16
        assert!(train_mfd(&ds, &ds.all_rows(), 1.0, &teacher, &cfg).is_err());
    }

    #[test]
    fn trainers_require_group_labels() {
        let ds = gapped_dataset(20, 0.0, 29);
        let mut groups: Vec<Option<usize>> = ds.groups().to_vec();
        groups[5] = None;
        let ds = ds.with_groups(groups).unwrap();
        let cfg = quick_config(2);
        assert!(train_lbc(&ds, &ds.all_rows(), 1.0, 5, &cfg).is_err());
        assert!(train_fairhsic(&ds, &ds.all_rows(), 1.0, &cfg).is_err());
    }

    #[test]
    fn reduced_disparity_on_gapped_data_single_seed() {
        // One-seed smoke check that the penalties act in the right
        // direction; the multi-seed comparisons live below.
        let ds = gapped_dataset(600, 2.0, 31);
        let test = gapped_dataset(400, 2.0, 32);
        let cfg = quick_config(5);
        let rows = ds.all_rows();
        let eval_rows = test.all_rows();
        let scratch = train_scratch(&ds, &rows, &cfg).unwrap();
        let scratch_report = crate::metrics::evaluate(&scratch, &test, &eval_rows).unwrap();

        let lbc = train_lbc(&ds, &rows, 30.0, 5, &cfg).unwrap();
        let lbc_report = crate::metrics::evaluate(&lbc, &test, &eval_rows).unwrap();
        assert!(
            lbc_report.delta_m < scratch_report.delta_m,
            "lbc {} vs scratch {}",
            lbc_report.delta_m,
            scratch_report.delta_m
        );
    }

    #[test]
    fn trainers_reduce_disparity_over_paired_seeds() {
        // Paired comparison on the biased generator with full group labels:
        // each trainer's mean max-disparity over 8 seeds must undercut the
        // scratch baseline trained on the same data with the same seeds.
        use crate::synth::{generate, SynthSpec};
        let mut sums = [0.0f64; 4]; // scratch, lbc, hsic, mfd
        for seed in 0..8u64 {
            let spec = SynthSpec {
                class_sep: 2.0,
                group_shift: 4.0,
                group_marker: 0.8,
                n_train: 700,
                n_test: 800,
                seed,
                ..SynthSpec::default()
            };
            let (train_ds, test_ds) = generate(&spec).unwrap();
            let rows = train_ds.all_rows();
            let eval_rows = test_ds.all_rows();
            let cfg = quick_config(seed);
            let eval = |model: &MlpModel| {
                crate::metrics::evaluate(model, &test_ds, &eval_rows)
                    .unwrap()
                    .delta_m
            };
            let scratch = train_scratch(&train_ds, &rows, &cfg).unwrap();
            sums[0] += eval(&scratch);
            sums[1] += eval(&train_lbc(&train_ds, &rows, 30.0, 5, &cfg).unwrap());
            sums[2] += eval(&train_fairhsic(&train_ds, &rows, 3000.0, &cfg).unwrap());
            sums[3] += eval(&train_mfd(&train_ds, &rows, 1000.0, &scratch, &cfg).unwrap());
        }
        let [scratch, lbc, hsic, mfd] = sums.map(|s| s / 8.0);
        assert!(lbc < scratch, "lbc {lbc} vs scratch {scratch}");
        assert!(hsic < scratch, "hsic {hsic} vs scratch {scratch}");
        assert!(mfd < scratch, "mfd {mfd} vs scratch {scratch}");
    }

    #[test]
    fn select_model_prefers_fair_qualifier() {
        let mk = |acc: f64, dm: f64| FairnessReport {
            accuracy: acc,
            delta_m: dm,
            delta_a: dm / 2.0,
            table: vec![],
            support: vec![],
            n_eval: 100,
        };
        let candidates = vec![
            SelectionCandidate { strength: 1.0, report: mk(0.77, 0.05) },
            SelectionCandidate { strength: 3.0, report: mk(0.76, 0.02) },
            SelectionCandidate { strength: 10.0, report: mk(0.70, 0.01) },
        ];
        let chosen = select_model(&candidates, 0.80, 0.95).unwrap();
        assert_eq!(chosen, 1);
    }

    #[test]
    fn select_model_falls_back_to_accuracy() {
        let mk = |acc: f64, dm: f64| FairnessReport {
            accuracy: acc,
            delta_m: dm,
            delta_a: dm,
            table: vec![],
            support: vec![],
            n_eval: 10,
        };
        let candidates = vec![
            SelectionCandidate { strength: 1.0, report: mk(0.50, 0.10) },
            SelectionCandidate { strength: 3.0, report: mk(0.60, 0.20) },
        ];
        let chosen = select_model(&candidates, 0.80, 0.95).unwrap();
        assert_eq!(chosen, 1, "no qualifier: best accuracy wins");
    }

    #[test]
    fn select_model_ties_resolve_to_smaller_strength() {
        let mk = |acc: f64, dm: f64| FairnessReport {
            accuracy: acc,
            delta_m: dm,
            delta_a: dm,
            table: vec![],
            support: vec![],
            n_eval: 10,
        };
        let candidates = vec![
            SelectionCandidate { strength: 30.0, report: mk(0.79, 0.02) },
            SelectionCandidate { strength: 3.0, report: mk(0.79, 0.02) },
            SelectionCandidate { strength: 10.0, report: mk(0.79, 0.02) },
        ];
        let chosen = select_model(&candidates, 0.80, 0.95).unwrap();
        assert_eq!(candidates[chosen].strength, 3.0);
    }

    #[test]
    fn select_model_order_invariant() {
        let mk = |acc: f64, dm: f64, s: f64| SelectionCandidate {
            strength: s,
            report: FairnessReport {
                accuracy: acc,
                delta_m: dm,
                delta_a: dm,
                table: vec![],
                support: vec![],
                n_eval: 10,
            },
        };
        let mut candidates = vec![
            mk(0.78, 0.05, 1.0),
            mk(0.77, 0.03, 3.0),
            mk(0.79, 0.04, 10.0),
            mk(0.60, 0.01, 30.0),
        ];
        let first = candidates[select_model(&candidates, 0.80, 0.95).unwrap()].clone();
        candidates.reverse();
        let second = candidates[select_model(&candidates, 0.80, 0.95).unwrap()].clone();
        assert_eq!(first, second);
        candidates.swap(0, 2);
        let third = candidates[select_model(&candidates, 0.80, 0.95).unwrap()].clone();
        assert_eq!(first, third);
    }

    #[test]
    fn train_fair_dispatch_matches_direct_calls() {
        let ds = gapped_dataset(80, 1.0, 37);
        let cfg = quick_config(6);
        let rows = ds.all_rows();
        let via_dispatch = train_fair(&ds, &rows, &TrainerSpec::Scratch, None, &cfg).unwrap();
        let direct = train_scratch(&ds, &rows, &cfg).unwrap();
        assert_eq!(via_dispatch.params_flat(), direct.params_flat());
        assert!(train_fair(
            &ds,
            &rows,
            &TrainerSpec::Mfd { lambda: 1.0 },
            None,
            &cfg
        )
        .is_err());
    }

    #[test]
    fn separable_blobs_reach_high_accuracy_scratch() {
        let ds = gapped_dataset(300, 0.0, 41);
        let cfg = quick_config(7);
        let model = train_scratch(&ds, &ds.all_rows(), &cfg).unwrap();
        let correct = (0..ds.len())
            .filter(|&r| {
                let (logits, _) = model.forward(ds.feature(r)).unwrap();
                argmax(&logits) == ds.target(r)
            })
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.95);
    }
}
