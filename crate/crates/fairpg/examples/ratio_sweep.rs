//! A small end-to-end sweep: policies by ratios with hyperparameter grids,
//! model selection against the scratch baseline, tables and plots.
//!
//!     cargo run --example ratio_sweep

use fairpg::cgl::AssignmentPolicy;
use fairpg::harness::{
    emit_report, run_sweep, DatasetSource, ExperimentConfig, Format, TrainerGrid,
};
use fairpg::synth::SynthSpec;
use fairpg::train::TrainConfig;

fn main() -> fairpg::Result<()> {
    let config = ExperimentConfig {
        dataset: DatasetSource::Synthetic(SynthSpec {
            class_sep: 2.0,
            group_shift: 4.0,
            group_marker: 0.8,
            majority_fraction: Some(0.65),
            n_train: 600,
            n_test: 400,
            seed: 0,
            ..SynthSpec::default()
        }),
        ratios: vec![1.0, 0.5, 0.1],
        policies: vec![
            AssignmentPolicy::GroupLabeledOnly,
            AssignmentPolicy::RandomLabel,
            AssignmentPolicy::PseudoLabel,
            AssignmentPolicy::Cgl { tau: None },
        ],
        trainers: vec![TrainerGrid::Lbc {
            alphas: vec![1.0, 10.0, 100.0],
            eval_period_epochs: 5,
        }],
        seeds: vec![0, 1, 2],
        accuracy_floor: 0.90,
        train: TrainConfig {
            epochs: 20,
            lr: 0.01,
            hidden: 16,
            batch_size: 64,
            ..TrainConfig::default()
        },
        group_train: TrainConfig {
            epochs: 60,
            lr: 0.02,
            hidden: 0,
            batch_size: 32,
            ..TrainConfig::default()
        },
        output_dir: None,
    };

    let result = run_sweep(&config)?;
    println!(
        "{} cells, {} failures; means over {} seeds:",
        result.cells.len(),
        result.failures,
        config.seeds.len()
    );
    println!(
        "{:<22} {:>6}  {:>16}  {:>16}",
        "method", "ratio", "accuracy", "delta_m"
    );
    for agg in &result.aggregates {
        println!(
            "{:<22} {:>6}  {:>7.4} (±{:.3})  {:>7.4} (±{:.3})",
            format!("{}/{}", agg.policy, agg.trainer),
            agg.ratio,
            agg.accuracy_mean,
            agg.accuracy_std,
            agg.delta_m_mean,
            agg.delta_m_std
        );
    }

    let out = std::path::Path::new("target/examples-out/sweep");
    let files = emit_report(&result, &[Format::Csv, Format::Svg], out)?;
    println!("\nwrote:");
    for file in files {
        println!("  {}", file.display());
    }
    Ok(())
}
