//! Command-line front end.
//!
//! Every subcommand reads a single JSON config document (flags override the
//! fields they name) and writes deterministic files: rerunning a subcommand
//! with the same config and seed produces byte-identical JSON outputs.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 when at least one
//! runtime cell failed (partial results are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use fairpg::cgl::{apply_assignment, run_cgl_pipeline, AssignmentPolicy};
use fairpg::data::{partition_group_labeled, Dataset};
use fairpg::error::{Error, Result};
use fairpg::fairtrain::{select_model, train_fair, train_scratch, SelectionCandidate};
use fairpg::harness::{
    emit_report, emit_tau_study, load_sweep, run_sweep_with_workers, run_tau_study, DatasetSource,
    ExperimentConfig, Format, TrainerGrid,
};
use fairpg::metrics::evaluate;
use fairpg::synth::{generate, mask_groups, SynthSpec};
use fairpg::train::TrainConfig;
use fairpg::world::run_enumeration_suite;

#[derive(Parser)]
#[command(name = "fairpg", version, about = "Fairness-aware training with partially annotated group labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset pair (train.csv, test.csv, spec.json).
    Gen {
        /// Generator spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Mask group labels down to this ratio before writing.
        #[arg(long)]
        mask_ratio: Option<f64>,
    },
    /// Run the assignment pipeline (assignment.csv, diagnostics.json).
    Assign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one configured trainer (model.json, report.json).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full ratio sweep (sweep.json plus tables and plots).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated list among json,csv,svg.
        #[arg(long, default_value = "csv,svg")]
        formats: String,
        /// Worker-pool size (FAIRPG_WORKERS also works).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Sweep the confidence threshold at one ratio (tau_study.json, ...).
    TauStudy {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated thresholds in [0, 1]; endpoints reproduce the
        /// pseudo-label and random-label baselines.
        #[arg(long, default_value = "0,0.25,0.5,0.75,0.9,1")]
        taus: String,
        /// Report directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv,svg")]
        formats: String,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Verify the assignment-transform identities by enumeration.
    Oracle {
        /// Region-invariance worlds.
        #[arg(long, default_value_t = 500)]
        count: usize,
        /// Influence-dominance worlds (binary groups).
        #[arg(long, default_value_t = 200)]
        count_binary: usize,
        #[arg(long, default_value_t = 10)]
        max_nx: usize,
        #[arg(long, default_value_t = 4)]
        max_na: usize,
        #[arg(long, default_value_t = 3)]
        max_ny: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write oracle.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit tables and plots from a stored sweep.json.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv,svg")]
        formats: String,
    },
}

/// Config for the `assign` subcommand.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignConfig {
    dataset: DatasetSource,
    policy: AssignmentPolicy,
    #[serde(default)]
    group_train: TrainConfig,
    #[serde(default)]
    seed: u64,
    /// Mask a fully labeled training set down to this ratio first.
    #[serde(default)]
    mask_ratio: Option<f64>,
}

/// Config for the `train` subcommand.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainCliConfig {
    dataset: DatasetSource,
    policy: AssignmentPolicy,
    trainer: TrainerGrid,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    group_train: TrainConfig,
    #[serde(default = "default_floor")]
    accuracy_floor: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mask_ratio: Option<f64>,
}

fn default_floor() -> f64 {
    0.95
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn parse_formats(s: &str) -> Result<Vec<Format>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn parse_taus(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad threshold {p:?}: {e}")))
        })
        .collect()
}

/// Materializes the training/test pair named by a dataset source.
fn load_pair(source: &DatasetSource) -> Result<(Dataset, Dataset)> {
    match source {
        DatasetSource::Synthetic(spec) => generate(spec),
        DatasetSource::Csv { train, test } => {
            let train_ds = Dataset::read_csv(train)?;
            let test_ds = Dataset::read_csv(test)?;
            let num_classes = train_ds.num_classes().max(test_ds.num_classes());
            let num_groups = train_ds.num_groups().max(test_ds.num_groups());
            Ok((
                Dataset::read_csv_with_meta(train, num_classes, num_groups)?,
                Dataset::read_csv_with_meta(test, num_classes, num_groups)?,
            ))
        }
    }
}

fn cmd_gen(spec: &Path, out: &Path, seed: Option<u64>, mask_ratio: Option<f64>) -> Result<()> {
    let mut spec: SynthSpec = read_json(spec)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let (mut train, test) = generate(&spec)?;
    if let Some(ratio) = mask_ratio {
        train = mask_groups(&train, ratio, spec.seed)?;
    }
    std::fs::create_dir_all(out)?;
    train.write_csv(&out.join("train.csv"))?;
    test.write_csv(&out.join("test.csv"))?;
    write_json(
        &out.join("spec.json"),
        &serde_json::json!({ "spec": spec, "mask_ratio": mask_ratio }),
    )?;
    println!(
        "gen: wrote {} train rows, {} test rows to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

fn cmd_assign(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut config: AssignConfig = read_json(config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let (mut train, _) = load_pair(&config.dataset)?;
    let truth: Option<Vec<usize>> = train
        .fully_group_labeled()
        .then(|| (0..train.len()).map(|r| train.group(r).unwrap()).collect());
    if let Some(ratio) = config.mask_ratio {
        train = mask_groups(&train, ratio, config.seed)?;
    }
    let (assignment, diagnostics) = run_cgl_pipeline(
        &train,
        config.policy,
        &config.group_train,
        config.seed,
        truth.as_deref(),
    )?;
    std::fs::create_dir_all(out)?;
    assignment.write_csv(&out.join("assignment.csv"))?;
    write_json(&out.join("diagnostics.json"), &diagnostics)?;
    println!(
        "assign: {} rows assigned ({} labeled, {} unlabeled), diagnostics in {}",
        assignment.len(),
        diagnostics.n_labeled,
        diagnostics.n_unlabeled,
        out.display()
    );
    Ok(())
}

fn cmd_train(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut config: TrainCliConfig = read_json(config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.trainer.validate()?;
    let (mut train, test) = load_pair(&config.dataset)?;
    let truth: Option<Vec<usize>> = train
        .fully_group_labeled()
        .then(|| (0..train.len()).map(|r| train.group(r).unwrap()).collect());
    if let Some(ratio) = config.mask_ratio {
        train = mask_groups(&train, ratio, config.seed)?;
    }

    let scratch_cfg = config.train.clone().with_seed(config.seed ^ 0x5c4a7c);
    let teacher = train_scratch(&train, &train.all_rows(), &scratch_cfg)?;
    let scratch_accuracy = evaluate(&teacher, &test, &test.all_rows())?.accuracy;

    let (assignment, diagnostics) = run_cgl_pipeline(
        &train,
        config.policy,
        &config.group_train,
        config.seed,
        truth.as_deref(),
    )?;
    let (view, rows) = if matches!(config.policy, AssignmentPolicy::GroupLabeledOnly) {
        let (labeled, _) = partition_group_labeled(&train);
        (train.clone(), labeled)
    } else {
        (apply_assignment(&train, &assignment)?, train.all_rows())
    };

    let specs = config.trainer.specs();
    let mut candidates = Vec::new();
    let mut models = Vec::new();
    for (idx, spec) in specs.iter().enumerate() {
        let run_cfg = config
            .train
            .clone()
            .with_seed(config.seed.wrapping_add(idx as u64).wrapping_mul(0x9e3779b9));
        let model = train_fair(&view, &rows, spec, Some(&teacher), &run_cfg)?;
        let report = evaluate(&model, &test, &test.all_rows())?;
        candidates.push(SelectionCandidate {
            strength: spec.strength(),
            report,
        });
        models.push(model);
    }
    let chosen = select_model(&candidates, scratch_accuracy, config.accuracy_floor)?;

    std::fs::create_dir_all(out)?;
    write_json(&out.join("model.json"), &models[chosen].to_json())?;
    write_json(
        &out.join("report.json"),
        &serde_json::json!({
            "trainer": config.trainer.family(),
            "selected_strength": candidates[chosen].strength,
            "scratch_accuracy": scratch_accuracy,
            "report": candidates[chosen].report,
            "candidates": candidates,
            "diagnostics": diagnostics,
        }),
    )?;
    println!(
        "train: {} strength {} -> accuracy {:.4}, delta_m {:.4} ({})",
        config.trainer.family(),
        candidates[chosen].strength,
        candidates[chosen].report.accuracy,
        candidates[chosen].report.delta_m,
        out.display()
    );
    Ok(())
}

fn resolve_out(flag: Option<PathBuf>, config_dir: &Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| config_dir.clone()).ok_or_else(|| {
        Error::InvalidConfig("no output directory: pass --out or set output_dir".into())
    })
}

fn cmd_sweep(
    config: &Path,
    out: Option<PathBuf>,
    formats: &str,
    workers: Option<usize>,
) -> Result<bool> {
    let config: ExperimentConfig = read_json(config)?;
    let out = resolve_out(out, &config.output_dir)?;
    let formats = parse_formats(formats)?;
    let result = run_sweep_with_workers(&config, workers)?;
    let files = emit_report(&result, &formats, &out)?;
    for file in &files {
        println!("sweep: wrote {}", file.display());
    }
    if result.failures > 0 {
        eprintln!("sweep: {} cell(s) failed; partial results written", result.failures);
    }
    Ok(result.failures == 0)
}

fn cmd_tau_study(
    config: &Path,
    taus: &str,
    out: Option<PathBuf>,
    formats: &str,
    workers: Option<usize>,
) -> Result<bool> {
    let config: ExperimentConfig = read_json(config)?;
    let out = resolve_out(out, &config.output_dir)?;
    let taus = parse_taus(taus)?;
    let formats = parse_formats(formats)?;
    if let Some(n) = workers {
        std::env::set_var(fairpg::harness::WORKERS_ENV, n.to_string());
    }
    let study = run_tau_study(&config, &taus)?;
    let files = emit_tau_study(&study, &formats, &out)?;
    for file in &files {
        println!("tau-study: wrote {}", file.display());
    }
    if study.failures > 0 {
        eprintln!("tau-study: {} cell(s) failed", study.failures);
    }
    Ok(study.failures == 0)
}

fn cmd_oracle(
    count: usize,
    count_binary: usize,
    max_nx: usize,
    max_na: usize,
    max_ny: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<bool> {
    let summary = run_enumeration_suite(count, count_binary, max_nx, max_na, max_ny, seed);
    println!(
        "region invariance: {} worlds, worst diff {:.3e} -> {}",
        summary.invariance_worlds,
        summary.invariance_worst_diff,
        if summary.invariance_failures == 0 { "pass" } else { "FAIL" }
    );
    println!(
        "influence dominance: {} worlds, {} points checked, {} violations, min margin {:.3e} -> {}",
        summary.dominance_worlds,
        summary.dominance_checked_points,
        summary.dominance_violations,
        summary.dominance_min_margin,
        if summary.dominance_violations == 0 { "pass" } else { "FAIL" }
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("oracle.json"), &summary)?;
        println!("oracle: wrote {}", dir.join("oracle.json").display());
    }
    Ok(summary.pass)
}

fn cmd_report(input: &Path, out: &Path, formats: &str) -> Result<()> {
    let result = load_sweep(input)?;
    let formats = parse_formats(formats)?;
    let files = emit_report(&result, &formats, out)?;
    for file in &files {
        println!("report: wrote {}", file.display());
    }
    Ok(())
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_)
            | Error::Json(_)
            | Error::CsvFormat { .. }
            | Error::InvalidDataset(_)
    )
}

fn run(cli: Cli) -> std::result::Result<bool, Error> {
    match cli.command {
        Command::Gen { spec, out, seed, mask_ratio } => {
            cmd_gen(&spec, &out, seed, mask_ratio).map(|_| true)
        }
        Command::Assign { config, out, seed } => cmd_assign(&config, &out, seed).map(|_| true),
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed).map(|_| true),
        Command::Sweep { config, out, formats, workers } => {
            cmd_sweep(&config, out, &formats, workers)
        }
        Command::TauStudy { config, taus, out, formats, workers } => {
            cmd_tau_study(&config, &taus, out, &formats, workers)
        }
        Command::Oracle { count, count_binary, max_nx, max_na, max_ny, seed, out } => {
            cmd_oracle(count, count_binary, max_nx, max_na, max_ny, seed, out.as_deref())
        }
        Command::Report { input, out, formats } => cmd_report(&input, &out, &formats).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are configuration errors.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) if is_config_error(&e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
