//! Sweep execution: cell scheduling, derived randomness, aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgl::{apply_assignment, run_cgl_pipeline, AssignmentPolicy};
use crate::data::{partition_group_labeled, Dataset};
use crate::error::{Error, Result};
use crate::fairtrain::{select_model, train_fair, train_scratch, SelectionCandidate};
use crate::metrics::{evaluate, FairnessReport};
use crate::mlp::MlpModel;
use crate::rng::SeededRng;
use crate::synth::{generate, mask_groups};

use super::{DatasetSource, ExperimentConfig, TrainerGrid};

/// One (ratio, policy, trainer, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub ratio: f64,
    pub policy: String,
    pub trainer: String,
    pub seed: u64,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Ok {
        report: FairnessReport,
        /// Hyperparameter strength chosen by the selection rule.
        selected_strength: f64,
        /// Scratch accuracy the selection floor was measured against.
        scratch_accuracy: f64,
        val_group_accuracy: Option<f64>,
        tau: Option<f64>,
        threshold_objective: Option<f64>,
        confidence_histogram: Vec<u64>,
    },
    Error { message: String },
}

/// Mean and standard deviation over seeds for one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub ratio: f64,
    pub policy: String,
    pub trainer: String,
    /// Seeds that completed.
    pub n: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub delta_m_mean: f64,
    pub delta_m_std: f64,
    pub delta_a_mean: f64,
    pub delta_a_std: f64,
}

/// Everything a sweep produced, in deterministic cell order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateCell>,
    pub failures: usize,
}

/// One entry of the threshold study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCell {
    /// `pseudo_label`, `random_label`, or `tau_<value>`.
    pub label: String,
    pub tau: Option<f64>,
    pub n: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub delta_m_mean: f64,
    pub delta_m_std: f64,
    pub delta_a_mean: f64,
    pub delta_a_std: f64,
}

/// Threshold-study output: fixed trainer and ratio, varying threshold.
///
/// The threshold convention follows the assignment rule (`confidence > tau`
/// trusts the prediction): tau = 0 trusts everything and reproduces the
/// pseudo-label cells, tau = 1 randomizes everything and reproduces the
/// random-label cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauStudyResult {
    pub config: ExperimentConfig,
    pub taus: Vec<f64>,
    pub entries: Vec<TauCell>,
    pub failures: usize,
}

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "FAIRPG_WORKERS";

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(value) => {
            let workers: usize = value.parse().map_err(|_| {
                Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer"))
            })?;
            if workers == 0 {
                return Err(Error::InvalidConfig(format!(
                    "{WORKERS_ENV} must be a positive integer"
                )));
            }
            Ok(Some(workers))
        }
        Err(_) => Ok(None),
    }
}

fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

/// Per-seed shared state: the materialized data and the scratch model, which
/// doubles as the distillation teacher.
struct SeedContext {
    seed: u64,
    train: Dataset,
    test: Dataset,
    scratch: MlpModel,
    scratch_accuracy: f64,
}

fn experiment_root(seed: u64) -> SeededRng {
    SeededRng::new(seed).derive("experiment")
}

fn materialize(config: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    match &config.dataset {
        DatasetSource::Synthetic(spec) => {
            // Mix the generator seed with the experiment seed so each seed
            // sees an independent draw of the same distribution.
            let data_seed = SeededRng::new(spec.seed)
                .derive(&format!("experiment-seed/{seed}"))
                .seed();
            let mut spec = spec.clone();
            spec.seed = data_seed;
            generate(&spec)
        }
        DatasetSource::Csv { train, test } => {
            let train_ds = Dataset::read_csv(train)?;
            let test_ds = Dataset::read_csv(test)?;
            // Unify label spaces across the two files.
            let num_classes = train_ds.num_classes().max(test_ds.num_classes());
            let num_groups = train_ds.num_groups().max(test_ds.num_groups());
            Ok((
                Dataset::read_csv_with_meta(train, num_classes, num_groups)?,
                Dataset::read_csv_with_meta(test, num_classes, num_groups)?,
            ))
        }
    }
}

fn seed_context(config: &ExperimentConfig, seed: u64) -> Result<SeedContext> {
    let (train, test) = materialize(config, seed)?;
    let root = experiment_root(seed);
    let scratch_cfg = config
        .train
        .clone()
        .with_seed(root.derive("scratch-model").seed());
    let scratch = train_scratch(&train, &train.all_rows(), &scratch_cfg)?;
    let scratch_accuracy = evaluate(&scratch, &test, &test.all_rows())?.accuracy;
    Ok(SeedContext {
        seed,
        train,
        test,
        scratch,
        scratch_accuracy,
    })
}

/// Runs one (ratio, policy) slot for every trainer family; the randomness
/// tags exclude the policy so that aligned policies (the cgl extremes and
/// their baselines) share streams exactly.
fn run_policy_cells(
    config: &ExperimentConfig,
    ctx: &SeedContext,
    ratio: f64,
    policy: AssignmentPolicy,
) -> Vec<CellResult> {
    let policy_key = policy.key();
    let mut results = Vec::with_capacity(config.trainers.len());
    match run_policy_slot(config, ctx, ratio, policy) {
        Ok(per_trainer) => {
            for (grid, outcome) in config.trainers.iter().zip(per_trainer) {
                results.push(CellResult {
                    ratio,
                    policy: policy_key.clone(),
                    trainer: grid.family().to_string(),
                    seed: ctx.seed,
                    outcome,
                });
            }
        }
        Err(e) => {
            for grid in &config.trainers {
                results.push(CellResult {
                    ratio,
                    policy: policy_key.clone(),
                    trainer: grid.family().to_string(),
                    seed: ctx.seed,
                    outcome: CellOutcome::Error {
                        message: e.to_string(),
                    },
                });
            }
        }
    }
    results
}

fn run_policy_slot(
    config: &ExperimentConfig,
    ctx: &SeedContext,
    ratio: f64,
    policy: AssignmentPolicy,
) -> Result<Vec<CellOutcome>> {
    let root = experiment_root(ctx.seed);
    let masked = if (ratio - 1.0).abs() < f64::EPSILON {
        ctx.train.clone()
    } else {
        mask_groups(
            &ctx.train,
            ratio,
            root.derive(&format!("mask/{ratio}")).seed(),
        )?
    };

    let truth: Option<Vec<usize>> = if ctx.train.fully_group_labeled() {
        Some((0..ctx.train.len()).map(|r| ctx.train.group(r).unwrap()).collect())
    } else {
        None
    };

    let pipeline_seed = root.derive(&format!("pipeline/{ratio}")).seed();
    let (assignment, diagnostics) = run_cgl_pipeline(
        &masked,
        policy,
        &config.group_train,
        pipeline_seed,
        truth.as_deref(),
    )?;

    let (train_view, rows) = if matches!(policy, AssignmentPolicy::GroupLabeledOnly) {
        let (labeled, _) = partition_group_labeled(&masked);
        (masked.clone(), labeled)
    } else {
        (apply_assignment(&masked, &assignment)?, masked.all_rows())
    };

    let test_rows = ctx.test.all_rows();
    let mut outcomes = Vec::with_capacity(config.trainers.len());
    for grid in &config.trainers {
        let outcome = run_trainer_grid(
            config, ctx, &root, ratio, grid, &train_view, &rows, &test_rows, &diagnostics,
        )
        .unwrap_or_else(|e| CellOutcome::Error {
            message: e.to_string(),
        });
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[allow(clippy::too_many_arguments)]
fn run_trainer_grid(
    config: &ExperimentConfig,
    ctx: &SeedContext,
    root: &SeededRng,
    ratio: f64,
    grid: &TrainerGrid,
    train_view: &Dataset,
    rows: &[usize],
    test_rows: &[usize],
    diagnostics: &crate::cgl::CglDiagnostics,
) -> Result<CellOutcome> {
    let specs = grid.specs();
    let mut candidates = Vec::with_capacity(specs.len());
    for (idx, spec) in specs.iter().enumerate() {
        let run_seed = root
            .derive(&format!("train/{ratio}/{}/{idx}", grid.family()))
            .seed();
        let run_cfg = config.train.clone().with_seed(run_seed);
        let model = train_fair(train_view, rows, spec, Some(&ctx.scratch), &run_cfg)?;
        let report = evaluate(&model, &ctx.test, test_rows)?;
        candidates.push(SelectionCandidate {
            strength: spec.strength(),
            report,
        });
    }
    let chosen = select_model(&candidates, ctx.scratch_accuracy, config.accuracy_floor)?;
    Ok(CellOutcome::Ok {
        report: candidates[chosen].report.clone(),
        selected_strength: candidates[chosen].strength,
        scratch_accuracy: ctx.scratch_accuracy,
        val_group_accuracy: diagnostics.val_group_accuracy,
        tau: diagnostics.tau,
        threshold_objective: diagnostics.threshold_objective,
        confidence_histogram: diagnostics.confidence_histogram.clone(),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(cells: &[CellResult], config: &ExperimentConfig) -> Vec<AggregateCell> {
    let mut out = Vec::new();
    for &ratio in &config.ratios {
        for policy in &config.policies {
            let policy_key = policy.key();
            for grid in &config.trainers {
                let family = grid.family();
                let mut acc = Vec::new();
                let mut dm = Vec::new();
                let mut da = Vec::new();
                for cell in cells {
                    if cell.ratio == ratio && cell.policy == policy_key && cell.trainer == family {
                        if let CellOutcome::Ok { report, .. } = &cell.outcome {
                            acc.push(report.accuracy);
                            dm.push(report.delta_m);
                            da.push(report.delta_a);
                        }
                    }
                }
                if acc.is_empty() {
                    continue;
                }
                let (am, asd) = mean_std(&acc);
                let (dmm, dmsd) = mean_std(&dm);
                let (dam, dasd) = mean_std(&da);
                out.push(AggregateCell {
                    ratio,
                    policy: policy_key.clone(),
                    trainer: family.to_string(),
                    n: acc.len(),
                    accuracy_mean: am,
                    accuracy_std: asd,
                    delta_m_mean: dmm,
                    delta_m_std: dmsd,
                    delta_a_mean: dam,
                    delta_a_std: dasd,
                });
            }
        }
    }
    out
}

/// Runs the full sweep across ratios, policies, trainers, and seeds.
///
/// Per-cell failures are recorded in the result and counted in `failures`;
/// the sweep itself only errors on invalid configuration. The worker count
/// honors the `FAIRPG_WORKERS` environment variable.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_with_workers(config, None)
}

/// As [`run_sweep`] with an explicit worker-count override; `None` falls
/// back to the `FAIRPG_WORKERS` environment variable.
pub fn run_sweep_with_workers(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<SweepResult> {
    config.validate()?;
    let workers = match workers {
        Some(n) => Some(n),
        None => workers_from_env()?,
    };
    let pool = worker_pool(workers)?;

    let contexts: Vec<Result<SeedContext>> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| seed_context(config, seed))
            .collect()
    });
    let mut ready = Vec::new();
    let mut failed_seeds = Vec::new();
    for (i, ctx) in contexts.into_iter().enumerate() {
        match ctx {
            Ok(ctx) => ready.push(ctx),
            Err(e) => failed_seeds.push((config.seeds[i], e.to_string())),
        }
    }

    let mut tasks = Vec::new();
    for (ri, &ratio) in config.ratios.iter().enumerate() {
        for (pi, policy) in config.policies.iter().enumerate() {
            for ctx in &ready {
                tasks.push((ri, pi, ratio, *policy, ctx));
            }
        }
    }

    let mut cells: Vec<((usize, usize, u64), Vec<CellResult>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ri, pi, ratio, policy, ctx)| {
                ((ri, pi, ctx.seed), run_policy_cells(config, ctx, ratio, policy))
            })
            .collect()
    });
    cells.sort_by_key(|&((ri, pi, seed), _)| (ri, pi, seed));

    let mut flat = Vec::new();
    for ((ri, pi, _), group) in cells {
        let _ = (ri, pi);
        flat.extend(group);
    }
    // Failed seeds surface as error cells for every slot they would fill.
    for (seed, message) in &failed_seeds {
        for &ratio in &config.ratios {
            for policy in &config.policies {
                for grid in &config.trainers {
                    flat.push(CellResult {
                        ratio,
                        policy: policy.key(),
                        trainer: grid.family().to_string(),
                        seed: *seed,
                        outcome: CellOutcome::Error {
                            message: message.clone(),
                        },
                    });
                }
            }
        }
    }

    let failures = flat
        .iter()
        .filter(|c| matches!(c.outcome, CellOutcome::Error { .. }))
        .count();
    let aggregates = aggregate(&flat, config);
    Ok(SweepResult {
        config: config.clone(),
        cells: flat,
        aggregates,
        failures,
    })
}

/// Threshold study: one ratio, one trainer at fixed strength, thresholds
/// from `taus` plus the pseudo-label and random-label reference cells.
///
/// Randomness tags exclude the policy, so the tau = 0 entry is byte-equal to
/// the pseudo-label entry and tau = 1 to the random-label entry.
pub fn run_tau_study(config: &ExperimentConfig, taus: &[f64]) -> Result<TauStudyResult> {
    config.validate()?;
    if config.ratios.len() != 1 {
        return Err(Error::InvalidConfig(
            "tau study needs exactly one ratio".into(),
        ));
    }
    if config.trainers.len() != 1 || config.trainers[0].specs().len() != 1 {
        return Err(Error::InvalidConfig(
            "tau study needs exactly one trainer at a fixed hyperparameter".into(),
        ));
    }
    if taus.is_empty() || taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidConfig(
            "thresholds must be non-empty and lie in [0, 1]".into(),
        ));
    }

    let mut policies: Vec<(String, Option<f64>, AssignmentPolicy)> = vec![
        (
            "pseudo_label".into(),
            None,
            AssignmentPolicy::PseudoLabel,
        ),
        (
            "random_label".into(),
            None,
            AssignmentPolicy::RandomLabel,
        ),
    ];
    for &tau in taus {
        policies.push((
            format!("tau_{tau}"),
            Some(tau),
            AssignmentPolicy::Cgl { tau: Some(tau) },
        ));
    }

    let pool = worker_pool(workers_from_env()?)?;
    let contexts: Vec<SeedContext> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| seed_context(config, seed))
            .collect::<Result<Vec<_>>>()
    })?;

    let ratio = config.ratios[0];
    let mut tasks = Vec::new();
    for (pi, (_, _, policy)) in policies.iter().enumerate() {
        for ctx in &contexts {
            tasks.push((pi, *policy, ctx));
        }
    }
    let mut cells: Vec<((usize, u64), CellResult)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(pi, policy, ctx)| {
                let mut results = run_policy_cells(config, ctx, ratio, policy);
                ((pi, ctx.seed), results.remove(0))
            })
            .collect()
    });
    cells.sort_by_key(|&((pi, seed), _)| (pi, seed));

    let mut entries = Vec::new();
    let mut failures = 0;
    for (pi, (label, tau, _)) in policies.iter().enumerate() {
        let mut acc = Vec::new();
        let mut dm = Vec::new();
        let mut da = Vec::new();
        for ((cell_pi, _), cell) in &cells {
            if *cell_pi != pi {
                continue;
            }
            match &cell.outcome {
                CellOutcome::Ok { report, .. } => {
                    acc.push(report.accuracy);
                    dm.push(report.delta_m);
                    da.push(report.delta_a);
                }
                CellOutcome::Error { .. } => failures += 1,
            }
        }
        if acc.is_empty() {
            continue;
        }
        let (am, asd) = mean_std(&acc);
        let (dmm, dmsd) = mean_std(&dm);
        let (dam, dasd) = mean_std(&da);
        entries.push(TauCell {
            label: label.clone(),
            tau: *tau,
            n: acc.len(),
            accuracy_mean: am,
            accuracy_std: asd,
            delta_m_mean: dmm,
            delta_m_std: dmsd,
            delta_a_mean: dam,
            delta_a_std: dasd,
        });
    }

    Ok(TauStudyResult {
        config: config.clone(),
        taus: taus.to_vec(),
        entries,
        failures,
    })
}
