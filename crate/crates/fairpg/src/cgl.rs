//! Confidence-based group-label assignment.
//!
//! The pipeline splits the group-labeled rows into a training and a
//! validation part, trains an auxiliary group classifier on the training
//! part, searches the confidence threshold that best separates correct from
//! incorrect predictions on the validation part, and then labels the
//! group-unlabeled rows: trust the argmax where the confidence exceeds the
//! threshold, draw from the empirical `P(A | Y = y)` everywhere else.
//!
//! The baselines are the threshold's extremes: with aligned random streams,
//! `Cgl(0)` produces exactly the pseudo-label assignment and `Cgl(1)` exactly
//! the random-label assignment. The random draws for the conditional come
//! from the full group-labeled set, one inverse-CDF draw per randomized row
//! in dataset order; confident rows consume no draws, which is what makes
//! the extreme-case equivalences exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conditional::{empirical_conditional, sample_group_or_marginal, ConditionalGroupTable};
use crate::data::{partition_group_labeled, Dataset};
use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::rng::SeededRng;
use crate::train::{train, Labels, TrainConfig};

/// Fraction of the group-labeled set used to train the group classifier;
/// the remainder is the threshold-search validation split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// How pseudo group labels are produced for the unlabeled rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentPolicy {
    /// No assignment; downstream trainers drop the unlabeled rows.
    GroupLabeledOnly,
    /// Draw every unlabeled row's group from the empirical `P(A | Y = y)`.
    RandomLabel,
    /// Trust the group classifier's argmax everywhere.
    PseudoLabel,
    /// Trust the argmax above the threshold, randomize below. `tau: None`
    /// asks the pipeline to search the threshold on the validation split.
    Cgl { tau: Option<f64> },
    /// Evaluation-only: keep correct argmax predictions, replace wrong ones
    /// by a uniformly random group. Requires the hidden true groups.
    OracleRandomWrong,
}

impl AssignmentPolicy {
    /// Stable identifier used in file names and cell keys.
    pub fn key(&self) -> String {
        match self {
            AssignmentPolicy::GroupLabeledOnly => "group_labeled_only".into(),
            AssignmentPolicy::RandomLabel => "random_label".into(),
            AssignmentPolicy::PseudoLabel => "pseudo_label".into(),
            AssignmentPolicy::Cgl { tau: None } => "cgl".into(),
            AssignmentPolicy::Cgl { tau: Some(t) } => format!("cgl_tau_{t}"),
            AssignmentPolicy::OracleRandomWrong => "oracle_random_wrong".into(),
        }
    }
}

/// Why a row received its pseudo group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Confident,
    Randomized,
}

/// Pseudo group labels for the unlabeled rows, aligned by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// Dataset row indices of the unlabeled rows, ascending.
    pub rows: Vec<usize>,
    pub pseudo_groups: Vec<usize>,
    pub provenance: Vec<Provenance>,
    /// Group-classifier confidence (max posterior) per row.
    pub confidence: Vec<f64>,
    /// Effective threshold: 0 for pseudo-label, 1 for random-label, the used
    /// threshold for cgl, absent for the other policies.
    pub tau: Option<f64>,
    /// Threshold-search objective evaluated at `tau` on the validation split.
    pub threshold_objective: Option<f64>,
    /// Seed of the stream that produced the train/validation split.
    pub split_seed: u64,
}

impl AssignmentResult {
    fn empty(split_seed: u64) -> Self {
        Self {
            rows: Vec::new(),
            pseudo_groups: Vec::new(),
            provenance: Vec::new(),
            confidence: Vec::new(),
            tau: None,
            threshold_objective: None,
            split_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes `row_index,pseudo_group,provenance,confidence` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row_index", "pseudo_group", "provenance", "confidence"])?;
        for i in 0..self.len() {
            w.write_record(&[
                self.rows[i].to_string(),
                self.pseudo_groups[i].to_string(),
                match self.provenance[i] {
                    Provenance::Confident => "confident".to_string(),
                    Provenance::Randomized => "randomized".to_string(),
                },
                self.confidence[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fills the assigned pseudo groups into a copy of the dataset.
pub fn apply_assignment(ds: &Dataset, result: &AssignmentResult) -> Result<Dataset> {
    let mut groups = ds.groups().to_vec();
    for (&row, &group) in result.rows.iter().zip(&result.pseudo_groups) {
        if row >= ds.len() {
            return Err(Error::InvalidConfig(format!(
                "assignment row {row} out of range"
            )));
        }
        if groups[row].is_some() {
            return Err(Error::InvalidConfig(format!(
                "assignment row {row} already has a group label"
            )));
        }
        groups[row] = Some(group);
    }
    ds.with_groups(groups)
}

/// Stratified train/validation split of the group-labeled rows.
///
/// Rows are bucketed by their `(group, target)` cell; each cell contributes
/// `round(fraction * cell_size)` training rows (at most the cell size), so
/// cells keep their proportions wherever counts permit. Errors when either
/// side ends up empty.
pub fn split_labeled(
    ds: &Dataset,
    labeled: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(
            "split fraction must lie strictly between 0 and 1".into(),
        ));
    }
    if labeled.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least two group-labeled rows to split".into(),
        ));
    }
    let mut cells: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
        std::collections::BTreeMap::new();
    for &row in labeled {
        let a = ds.group(row).ok_or(Error::MissingGroup { row })?;
        cells.entry((a, ds.target(row))).or_default().push(row);
    }
    let mut rng = SeededRng::new(seed);
    let mut train_rows = Vec::new();
    let mut val_rows = Vec::new();
    for rows in cells.values() {
        let mut rows = rows.clone();
        rng.shuffle(&mut rows);
        let take = ((fraction * rows.len() as f64).round() as usize).min(rows.len());
        train_rows.extend_from_slice(&rows[..take]);
        val_rows.extend_from_slice(&rows[take..]);
    }
    if train_rows.is_empty() || val_rows.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "split left an empty side ({} train, {} validation)",
            train_rows.len(),
            val_rows.len()
        )));
    }
    train_rows.sort_unstable();
    val_rows.sort_unstable();
    Ok((train_rows, val_rows))
}

/// Threshold-search objective: confident predictions that are correct plus
/// rejected predictions that are wrong.
fn threshold_objective(scored: &[(f64, bool)], tau: f64) -> f64 {
    scored
        .iter()
        .map(|&(conf, correct)| {
            if conf > tau {
                correct as u64 as f64
            } else {
                (!correct) as u64 as f64
            }
        })
        .sum()
}

/// Picks the threshold that best separates correct from incorrect
/// validation predictions.
///
/// Candidates are 0, 1, every distinct confidence, and every midpoint
/// between consecutive distinct confidences; the objective is piecewise
/// constant with left-closed steps at the confidences, so this grid covers
/// every attainable value and the smallest maximizing threshold is returned
/// exactly.
pub fn search_threshold_scored(scored: &[(f64, bool)]) -> (f64, f64) {
    let mut confs: Vec<f64> = scored.iter().map(|&(c, _)| c).collect();
    confs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    confs.dedup();
    let mut candidates = vec![0.0, 1.0];
    candidates.extend_from_slice(&confs);
    for pair in confs.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    let mut best_tau = 0.0;
    let mut best = f64::NEG_INFINITY;
    for &tau in &candidates {
        let objective = threshold_objective(scored, tau);
        if objective > best {
            best = objective;
            best_tau = tau;
        }
    }
    (best_tau, best)
}

/// Scores the group classifier on validation rows and searches the
/// confidence threshold.
pub fn search_threshold(g: &MlpModel, ds: &Dataset, val: &[usize]) -> Result<(f64, f64)> {
    let scored = score_rows(g, ds, val)?;
    if scored.is_empty() {
        return Err(Error::EmptyInput("threshold search over no rows"));
    }
    Ok(search_threshold_scored(&scored))
}

fn score_rows(g: &MlpModel, ds: &Dataset, rows: &[usize]) -> Result<Vec<(f64, bool)>> {
    rows.iter()
        .map(|&row| {
            let truth = ds.group(row).ok_or(Error::MissingGroup { row })?;
            let posterior = g.predict_posterior(ds.feature(row))?;
            Ok((posterior.confidence(), posterior.argmax() == truth))
        })
        .collect()
}

/// Assigns pseudo group labels to the unlabeled rows under `policy`.
///
/// `truth` supplies the hidden per-row true groups and is required only by
/// [`AssignmentPolicy::OracleRandomWrong`]. Randomized draws consume the rng
/// one uniform per randomized row, in dataset row order.
pub fn assign(
    g: &MlpModel,
    policy: AssignmentPolicy,
    ds: &Dataset,
    truth: Option<&[usize]>,
    rng: &mut SeededRng,
) -> Result<AssignmentResult> {
    let (labeled, unlabeled) = partition_group_labeled(ds);
    let mut result = AssignmentResult::empty(0);
    result.tau = match policy {
        AssignmentPolicy::PseudoLabel => Some(0.0),
        AssignmentPolicy::RandomLabel => Some(1.0),
        AssignmentPolicy::Cgl { tau: Some(t) } => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!(
                    "cgl threshold {t} outside [0, 1]"
                )));
            }
            Some(t)
        }
        AssignmentPolicy::Cgl { tau: None } => {
            return Err(Error::InvalidConfig(
                "cgl threshold unresolved; search it or provide one".into(),
            ))
        }
        _ => None,
    };
    if matches!(policy, AssignmentPolicy::GroupLabeledOnly) {
        return Ok(result);
    }

    // The empirical conditional comes from the full group-labeled set, not
    // just its training split.
    let table: Option<ConditionalGroupTable> = match policy {
        AssignmentPolicy::RandomLabel | AssignmentPolicy::Cgl { .. } => {
            Some(empirical_conditional(ds, &labeled)?)
        }
        _ => None,
    };
    if matches!(policy, AssignmentPolicy::OracleRandomWrong) && truth.is_none() {
        return Err(Error::InvalidConfig(
            "oracle_random_wrong requires the hidden true groups".into(),
        ));
    }

    for &row in &unlabeled {
        let posterior = g.predict_posterior(ds.feature(row))?;
        let confidence = posterior.confidence();
        let guess = posterior.argmax();
        let (group, provenance) = match policy {
            AssignmentPolicy::PseudoLabel => (guess, Provenance::Confident),
            AssignmentPolicy::RandomLabel => {
                let table = table.as_ref().expect("table built for random_label");
                (
                    sample_group_or_marginal(table, ds.target(row), rng),
                    Provenance::Randomized,
                )
            }
            AssignmentPolicy::Cgl { .. } => {
                let tau = result.tau.expect("tau resolved above");
                if confidence > tau {
                    (guess, Provenance::Confident)
                } else {
                    let table = table.as_ref().expect("table built for cgl");
                    (
                        sample_group_or_marginal(table, ds.target(row), rng),
                        Provenance::Randomized,
                    )
                }
            }
            AssignmentPolicy::OracleRandomWrong => {
                let truth = truth.expect("checked above");
                if truth.len() != ds.len() {
                    return Err(Error::DimensionMismatch {
                        what: "true groups",
                        expected: ds.len(),
                        got: truth.len(),
                    });
                }
                if guess == truth[row] {
                    (guess, Provenance::Confident)
                } else {
                    (rng.index(ds.num_groups()), Provenance::Randomized)
                }
            }
            AssignmentPolicy::GroupLabeledOnly => unreachable!("returned above"),
        };
        result.rows.push(row);
        result.pseudo_groups.push(group);
        result.provenance.push(provenance);
        result.confidence.push(confidence);
    }
    Ok(result)
}

/// Pipeline diagnostics: validation quality, the threshold, and the
/// confidence histogram over the unlabeled rows (bucket width 0.05).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CglDiagnostics {
    pub val_group_accuracy: Option<f64>,
    pub tau: Option<f64>,
    pub threshold_objective: Option<f64>,
    /// Fraction of validation rows where the threshold rule correctly
    /// predicts whether the argmax is right or wrong.
    pub threshold_rule_accuracy: Option<f64>,
    /// Counts of unlabeled-row confidences in [0, 0.05), ..., [0.95, 1.0].
    pub confidence_histogram: Vec<u64>,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_train_split: usize,
    pub n_val_split: usize,
}

impl CglDiagnostics {
    fn untrained(n_labeled: usize, n_unlabeled: usize) -> Self {
        Self {
            val_group_accuracy: None,
            tau: None,
            threshold_objective: None,
            threshold_rule_accuracy: None,
            confidence_histogram: vec![0; 20],
            n_labeled,
            n_unlabeled,
            n_train_split: 0,
            n_val_split: 0,
        }
    }
}

/// Histogram of confidences with bucket width 0.05; 1.0 lands in the last
/// bucket.
pub fn confidence_histogram(confidences: &[f64]) -> Vec<u64> {
    let mut buckets = vec![0u64; 20];
    for &c in confidences {
        let idx = ((c / 0.05) as usize).min(19);
        buckets[idx] += 1;
    }
    buckets
}

/// Full assignment pipeline: split, train the group classifier, resolve the
/// threshold, assign.
///
/// For [`AssignmentPolicy::Cgl`] with `tau: None` the threshold is searched
/// on the validation split; an explicit `tau` skips the search but the
/// objective is still evaluated at it for the diagnostics. The group
/// classifier is trained for every policy except `GroupLabeledOnly`, which
/// returns an empty assignment and untrained diagnostics.
pub fn run_cgl_pipeline(
    ds: &Dataset,
    policy: AssignmentPolicy,
    group_config: &TrainConfig,
    seed: u64,
    truth: Option<&[usize]>,
) -> Result<(AssignmentResult, CglDiagnostics)> {
    let (labeled, unlabeled) = partition_group_labeled(ds);
    if matches!(policy, AssignmentPolicy::GroupLabeledOnly) {
        let mut result = AssignmentResult::empty(0);
        result.split_seed = seed;
        return Ok((result, CglDiagnostics::untrained(labeled.len(), unlabeled.len())));
    }

    let root = SeededRng::new(seed);
    let split_seed = root.derive("split").seed();
    let (train_rows, val_rows) = split_labeled(ds, &labeled, TRAIN_FRACTION, split_seed)?;

    let group_cfg = group_config.clone().with_seed(root.derive("group-model").seed());
    let g = train(ds, &train_rows, Labels::Groups, &group_cfg, None)?;

    let scored = score_rows(&g, ds, &val_rows)?;
    let val_group_accuracy =
        scored.iter().filter(|&&(_, ok)| ok).count() as f64 / scored.len() as f64;

    let resolved_policy = match policy {
        AssignmentPolicy::Cgl { tau: None } => {
            let (tau, _) = search_threshold_scored(&scored);
            AssignmentPolicy::Cgl { tau: Some(tau) }
        }
        other => other,
    };

    let mut assign_rng = root.derive("assign");
    let mut result = assign(&g, resolved_policy, ds, truth, &mut assign_rng)?;
    result.split_seed = split_seed;
    if let Some(tau) = result.tau {
        result.threshold_objective = Some(threshold_objective(&scored, tau));
    }

    let diagnostics = CglDiagnostics {
        val_group_accuracy: Some(val_group_accuracy),
        tau: result.tau,
        threshold_objective: result.threshold_objective,
        threshold_rule_accuracy: result
            .threshold_objective
            .map(|obj| obj / scored.len() as f64),
        confidence_histogram: confidence_histogram(&result.confidence),
        n_labeled: labeled.len(),
        n_unlabeled: unlabeled.len(),
        n_train_split: train_rows.len(),
        n_val_split: val_rows.len(),
    };
    Ok((result, diagnostics))
}
