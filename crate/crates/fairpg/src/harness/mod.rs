//! Experiment driver: ratio sweeps, the threshold study, and report files.
//!
//! A sweep crosses group-label ratios, assignment policies, trainer
//! families with their hyperparameter grids, and seeds. Every cell draws its
//! randomness from a stream derived from the experiment seed and the cell
//! key, so results do not depend on execution order or worker count; the
//! scratch baseline (also the distillation teacher) is trained once per
//! (dataset, seed) and shared by all policies.
//!
//! File outputs: a canonical JSON dump (always), paper-style CSV tables
//! (one per metric, cells formatted `mean (±std)` in percent), and static
//! SVG line plots. Everything is byte-deterministic for a fixed config.

mod report;
mod svg;
mod sweep;

pub use report::{emit_report, emit_tau_study, load_sweep, table_cell, Format};
pub use svg::{histogram_svg, line_chart_svg};
pub use sweep::{
    run_sweep, run_sweep_with_workers, run_tau_study, AggregateCell, CellOutcome, CellResult,
    SweepResult, TauCell, TauStudyResult, WORKERS_ENV,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cgl::AssignmentPolicy;
use crate::error::{Error, Result};
use crate::fairtrain::{default_grid, TrainerSpec, LBC_DEFAULT_EVAL_PERIOD};
use crate::synth::SynthSpec;
use crate::train::TrainConfig;

/// Where the train/test data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Generated per seed from the spec (the spec's own seed is mixed with
    /// the experiment seed).
    Synthetic(SynthSpec),
    /// Fixed CSV pair; per-seed variation comes from masking and training.
    Csv { train: PathBuf, test: PathBuf },
}

/// A trainer family together with its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerGrid {
    Scratch,
    Lbc {
        alphas: Vec<f64>,
        #[serde(default = "default_eval_period")]
        eval_period_epochs: usize,
    },
    FairHsic { lambdas: Vec<f64> },
    Mfd { lambdas: Vec<f64> },
}

fn default_eval_period() -> usize {
    LBC_DEFAULT_EVAL_PERIOD
}

impl TrainerGrid {
    /// Grid with the default hyperparameter candidates for a family name.
    pub fn with_default_grid(family: &str) -> Result<Self> {
        Ok(match family {
            "scratch" => TrainerGrid::Scratch,
            "lbc" => TrainerGrid::Lbc {
                alphas: default_grid("lbc"),
                eval_period_epochs: LBC_DEFAULT_EVAL_PERIOD,
            },
            "fair_hsic" => TrainerGrid::FairHsic {
                lambdas: default_grid("fair_hsic"),
            },
            "mfd" => TrainerGrid::Mfd {
                lambdas: default_grid("mfd"),
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown trainer family {other:?}"
                )))
            }
        })
    }

    pub fn family(&self) -> &'static str {
        match self {
            TrainerGrid::Scratch => "scratch",
            TrainerGrid::Lbc { .. } => "lbc",
            TrainerGrid::FairHsic { .. } => "fair_hsic",
            TrainerGrid::Mfd { .. } => "mfd",
        }
    }

    /// Expands the grid into concrete trainer specs.
    pub fn specs(&self) -> Vec<TrainerSpec> {
        match self {
            TrainerGrid::Scratch => vec![TrainerSpec::Scratch],
            TrainerGrid::Lbc {
                alphas,
                eval_period_epochs,
            } => alphas
                .iter()
                .map(|&alpha| TrainerSpec::Lbc {
                    alpha,
                    eval_period_epochs: *eval_period_epochs,
                })
                .collect(),
            TrainerGrid::FairHsic { lambdas } => lambdas
                .iter()
                .map(|&lambda| TrainerSpec::FairHsic { lambda })
                .collect(),
            TrainerGrid::Mfd { lambdas } => lambdas
                .iter()
                .map(|&lambda| TrainerSpec::Mfd { lambda })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let specs = self.specs();
        if specs.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "trainer {} has an empty grid",
                self.family()
            )));
        }
        for spec in &specs {
            spec.validate()?;
        }
        Ok(())
    }
}

fn default_floor() -> f64 {
    0.95
}

fn default_ratios() -> Vec<f64> {
    vec![1.0, 0.8, 0.5, 0.25, 0.1]
}

/// Full sweep configuration; a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    pub policies: Vec<AssignmentPolicy>,
    pub trainers: Vec<TrainerGrid>,
    pub seeds: Vec<u64>,
    /// Candidates must reach `accuracy_floor * scratch accuracy` to qualify
    /// for fairness-first selection (0.90 is the usual tabular override).
    #[serde(default = "default_floor")]
    pub accuracy_floor: f64,
    /// Target-model training settings (per-run seeds are derived).
    #[serde(default)]
    pub train: TrainConfig,
    /// Group-classifier training settings.
    #[serde(default)]
    pub group_train: TrainConfig,
    /// Default report directory; the CLI `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be non-empty".into()));
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::InvalidConfig(
                "ratios must be non-empty and lie in (0, 1]".into(),
            ));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("policies must be non-empty".into()));
        }
        if self.trainers.is_empty() {
            return Err(Error::InvalidConfig("trainers must be non-empty".into()));
        }
        if !(self.accuracy_floor > 0.0 && self.accuracy_floor <= 1.0) {
            return Err(Error::InvalidConfig(
                "accuracy_floor must lie in (0, 1]".into(),
            ));
        }
        self.train.validate()?;
        self.group_train.validate()?;
        for trainer in &self.trainers {
            trainer.validate()?;
        }
        for policy in &self.policies {
            if let AssignmentPolicy::Cgl { tau: Some(t) } = policy {
                if !(0.0..=1.0).contains(t) {
                    return Err(Error::InvalidConfig(format!(
                        "cgl threshold {t} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The bundled desk-scale benchmark: a strongly biased multi-group
/// generator at the lowest label ratio, all four policies, and the
/// reweighting and HSIC trainers over their default grids, eight seeds.
///
/// The group classifier is a long-trained logistic model (`hidden: 0`): its
/// margin-based confidences are well ordered, which is what the threshold
/// rule relies on.
pub fn benchmark_config() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Synthetic(SynthSpec {
            dim: 6,
            num_classes: 3,
            num_groups: 4,
            class_sep: 2.0,
            group_shift: 4.0,
            group_marker: 1.2,
            label_noise: 0.0,
            majority_fraction: Some(0.4),
            n_train: 1200,
            n_test: 960,
            seed: 0,
        }),
        ratios: vec![0.1],
        policies: vec![
            AssignmentPolicy::GroupLabeledOnly,
            AssignmentPolicy::RandomLabel,
            AssignmentPolicy::PseudoLabel,
            AssignmentPolicy::Cgl { tau: None },
        ],
        trainers: vec![
            TrainerGrid::Lbc {
                alphas: default_grid("lbc"),
                eval_period_epochs: LBC_DEFAULT_EVAL_PERIOD,
            },
            TrainerGrid::FairHsic {
                lambdas: default_grid("fair_hsic"),
            },
        ],
        seeds: (8..16).collect(),
        // The tabular-scale selection floor.
        accuracy_floor: 0.90,
        train: TrainConfig {
            epochs: 30,
            lr: 0.01,
            hidden: 16,
            batch_size: 64,
            ..TrainConfig::default()
        },
        group_train: TrainConfig {
            epochs: 80,
            lr: 0.02,
            hidden: 0,
            batch_size: 32,
            ..TrainConfig::default()
        },
        output_dir: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_round_trip() {
        let config = benchmark_config();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let mut value = serde_json::to_value(benchmark_config()).unwrap();
        value["no_such_field"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(value).is_err());
    }

    #[test]
    fn config_validation_catches_bad_ratios() {
        let mut config = benchmark_config();
        config.ratios = vec![0.0];
        assert!(config.validate().is_err());
        config.ratios = vec![1.5];
        assert!(config.validate().is_err());
        config.ratios = vec![];
        assert!(config.validate().is_err());
    }

    #[test]
    fn trainer_grids_expand() {
        let grid = TrainerGrid::with_default_grid("fair_hsic").unwrap();
        assert_eq!(grid.specs().len(), 8);
        let grid = TrainerGrid::with_default_grid("lbc").unwrap();
        assert_eq!(grid.specs().len(), 5);
        assert!(TrainerGrid::with_default_grid("nope").is_err());
    }
}
