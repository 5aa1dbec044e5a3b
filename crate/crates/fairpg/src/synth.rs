//! Seeded synthetic datasets with a controllable group-fairness gap.
//!
//! Rows are Gaussian clusters per (group, class) cell over six or more
//! dimensions:
//!
//! - dims 0-1: class means on a circle, `class_sep` apart, shared by every
//!   group — the core signal;
//! - dims 2-3: a fixed marker offset per group (`group_marker` its radius),
//!   which makes the group learnable without moving class boundaries. For
//!   the non-privileged groups the marker fades on class 0 (scaled by
//!   `WEAK_MARKER_SCALE`), so group identity is genuinely uncertain exactly
//!   where the bias bites and annotation confidence varies by cell;
//! - dims 4-5: the bias. Group 0's clusters carry an extra class-aligned
//!   mean offset of magnitude `group_shift` here; every other group gets an
//!   offset of the same magnitude pointing at a *random* class, so these
//!   dims look similar across groups but are informative only for group 0
//!   and actively misleading for the rest. Plain training exploits the
//!   shortcut, which sharpens group 0 and derails the other groups, so the
//!   equalized-odds gap grows with `group_shift` and vanishes at zero,
//!   where the groups are exchangeable. A representation that ignores the
//!   group-dependent dims serves every group equally at the cost of group
//!   0's advantage, which is exactly the trade fairness trainers make.
//!
//! The test split is exactly balanced over (group, class) cells and never
//! carries label noise. [`mask_groups`] removes group labels down to a
//! target ratio, stratified per cell so no cell starves.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Marker attenuation for non-privileged groups on class 0.
pub const WEAK_MARKER_SCALE: f64 = 0.35;

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Feature dimensionality; at least 6 (class, marker, and shortcut
    /// dims, two each).
    pub dim: usize,
    pub num_classes: usize,
    pub num_groups: usize,
    /// Distance between adjacent class means.
    pub class_sep: f64,
    /// Magnitude of group 0's extra class-aligned offset; the bias knob.
    pub group_shift: f64,
    /// Radius of the group-identifying marker offset.
    pub group_marker: f64,
    /// Probability of flipping a training row's target to another class.
    pub label_noise: f64,
    /// Training-set probability of group 0 (the rest split uniformly);
    /// `None` draws groups uniformly. The test set stays balanced.
    pub majority_fraction: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dim: 6,
            num_classes: 2,
            num_groups: 2,
            class_sep: 2.5,
            group_shift: 0.0,
            group_marker: 1.5,
            label_noise: 0.0,
            majority_fraction: None,
            n_train: 1000,
            n_test: 400,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 6 {
            return Err(Error::InvalidConfig(
                "synthetic generator needs dim >= 6".into(),
            ));
        }
        if self.num_classes < 1 || self.num_groups < 1 {
            return Err(Error::InvalidConfig(
                "num_classes and num_groups must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::InvalidConfig(
                "label_noise must lie in [0, 0.5)".into(),
            ));
        }
        if self.n_train == 0 || self.n_test < self.num_classes * self.num_groups {
            return Err(Error::InvalidConfig(
                "n_train must be positive and n_test at least one row per cell".into(),
            ));
        }
        if self.class_sep < 0.0 || self.group_shift < 0.0 || self.group_marker < 0.0 {
            return Err(Error::InvalidConfig(
                "class_sep, group_shift, group_marker must be non-negative".into(),
            ));
        }
        if let Some(f) = self.majority_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(
                    "majority_fraction must lie strictly between 0 and 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn draw_group(&self, rng: &mut SeededRng) -> usize {
        match self.majority_fraction {
            Some(f) if self.num_groups > 1 => {
                if rng.uniform() < f {
                    0
                } else {
                    1 + rng.index(self.num_groups - 1)
                }
            }
            _ => rng.index(self.num_groups),
        }
    }

    fn class_angle(&self, y: usize) -> f64 {
        std::f64::consts::TAU * y as f64 / self.num_classes as f64
    }

    fn class_mean(&self, y: usize) -> (f64, f64) {
        if self.num_classes == 1 {
            return (0.0, 0.0);
        }
        let radius = self.class_sep / (2.0 * (std::f64::consts::PI / self.num_classes as f64).sin());
        let angle = self.class_angle(y);
        (radius * angle.cos(), radius * angle.sin())
    }

    fn group_marker_offset(&self, a: usize) -> (f64, f64) {
        if self.num_groups == 1 {
            return (0.0, 0.0);
        }
        let angle = std::f64::consts::TAU * a as f64 / self.num_groups as f64;
        (
            self.group_marker * angle.cos(),
            self.group_marker * angle.sin(),
        )
    }

    fn sample_features(&self, a: usize, y: usize, rng: &mut SeededRng) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        let (cx, cy) = self.class_mean(y);
        mean[0] = cx;
        mean[1] = cy;
        let (mx, my) = self.group_marker_offset(a);
        // Annotation difficulty accompanies the bias: with no bias the
        // marker is uniform and the groups stay exchangeable.
        let marker_scale = if a != 0 && y == 0 && self.num_classes > 1 && self.group_shift > 0.0 {
            WEAK_MARKER_SCALE
        } else {
            1.0
        };
        mean[2] = mx * marker_scale;
        mean[3] = my * marker_scale;
        // The shortcut dims: class-aligned for group 0, pointed at a random
        // class for everyone else.
        if self.num_classes > 1 && self.num_groups > 1 && self.group_shift > 0.0 {
            let pointed_at = if a == 0 { y } else { rng.index(self.num_classes) };
            let angle = self.class_angle(pointed_at);
            mean[4] = self.group_shift * angle.cos();
            mean[5] = self.group_shift * angle.sin();
        }
        // Per-row quality scales the whole signal: low-quality rows are hard
        // for the target and the group classifier alike, so group-label
        // confidence tracks where predictions actually fail.
        let quality = 0.3 + 1.4 * rng.uniform();
        mean.into_iter().map(|m| quality * m + rng.normal()).collect()
    }
}

/// Generates a fully labeled `(train, test)` pair.
///
/// Training rows draw their (group, class) cell uniformly; label noise, when
/// set, reassigns a training target to a uniformly random other class. The
/// test set holds exactly `n_test / (num_groups * num_classes)` rows per
/// cell (the remainder is dropped) and stays noise-free.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let root = SeededRng::new(spec.seed);

    let mut rng = root.derive("train");
    // Separate stream for noise decisions: features and groups stay
    // identical across label_noise settings.
    let mut noise_rng = root.derive("label-noise");
    let mut features = Vec::with_capacity(spec.n_train);
    let mut targets = Vec::with_capacity(spec.n_train);
    let mut groups = Vec::with_capacity(spec.n_train);
    for _ in 0..spec.n_train {
        let a = spec.draw_group(&mut rng);
        let y = rng.index(spec.num_classes);
        features.push(spec.sample_features(a, y, &mut rng));
        let noisy = spec.label_noise > 0.0
            && spec.num_classes > 1
            && noise_rng.uniform() < spec.label_noise;
        targets.push(if noisy {
            let other = noise_rng.index(spec.num_classes - 1);
            if other >= y {
                other + 1
            } else {
                other
            }
        } else {
            y
        });
        groups.push(Some(a));
    }
    let train = Dataset::new(features, targets, groups, spec.num_classes, spec.num_groups)?;

    let mut rng = root.derive("test");
    let per_cell = spec.n_test / (spec.num_classes * spec.num_groups);
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut groups = Vec::new();
    for a in 0..spec.num_groups {
        for y in 0..spec.num_classes {
            for _ in 0..per_cell {
                features.push(spec.sample_features(a, y, &mut rng));
                targets.push(y);
                groups.push(Some(a));
            }
        }
    }
    let test = Dataset::new(features, targets, groups, spec.num_classes, spec.num_groups)?;
    Ok((train, test))
}

/// Removes group labels down to `ratio`, stratified per (group, class) cell.
///
/// Each cell keeps `round(ratio * cell_size)` labels, never below one: a
/// ratio that would empty a cell is raised for that cell (with a warning)
/// so downstream conditionals stay defined. Features and targets are
/// untouched.
pub fn mask_groups(ds: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig("mask ratio must lie in (0, 1]".into()));
    }
    if !ds.fully_group_labeled() {
        return Err(Error::InvalidConfig(
            "mask_groups expects a fully group-labeled dataset".into(),
        ));
    }
    if (ratio - 1.0).abs() < f64::EPSILON {
        return Ok(ds.clone());
    }
    let mut cells: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
        std::collections::BTreeMap::new();
    for row in 0..ds.len() {
        let a = ds.group(row).expect("checked fully labeled");
        cells.entry((a, ds.target(row))).or_default().push(row);
    }
    let mut rng = SeededRng::new(seed);
    let mut groups: Vec<Option<usize>> = vec![None; ds.len()];
    for ((a, y), rows) in &cells {
        let mut rows = rows.clone();
        rng.shuffle(&mut rows);
        let requested = (ratio * rows.len() as f64).round() as usize;
        let keep = requested.clamp(1, rows.len());
        if requested == 0 {
            log::warn!(
                "mask ratio {ratio} would strip cell ({a},{y}); keeping one labeled row"
            );
        }
        for &row in &rows[..keep] {
            groups[row] = Some(*a);
        }
    }
    ds.with_groups(groups)
}
