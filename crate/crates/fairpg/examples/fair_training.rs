//! Compare the fairness-aware trainers on a biased dataset with full group
//! labels: vanilla training, cell reweighting, the HSIC penalty, and MMD
//! distillation.
//!
//!     cargo run --example fair_training

use fairpg::fairtrain::{train_fairhsic, train_lbc, train_mfd, train_scratch};
use fairpg::metrics::{evaluate, FairnessReport};
use fairpg::synth::{generate, SynthSpec};
use fairpg::train::TrainConfig;

fn show(name: &str, report: &FairnessReport) {
    println!(
        "{name:<22} accuracy {:.4}   delta_m {:.4}   delta_a {:.4}",
        report.accuracy, report.delta_m, report.delta_a
    );
}

fn main() -> fairpg::Result<()> {
    let spec = SynthSpec {
        class_sep: 2.0,
        group_shift: 4.0,
        group_marker: 0.8,
        majority_fraction: Some(0.65),
        n_train: 1200,
        n_test: 800,
        seed: 21,
        ..SynthSpec::default()
    };
    let (train, test) = generate(&spec)?;
    let rows = train.all_rows();
    let test_rows = test.all_rows();
    let config = TrainConfig {
        epochs: 30,
        lr: 0.01,
        hidden: 16,
        batch_size: 64,
        seed: 4,
        ..TrainConfig::default()
    };

    let scratch = train_scratch(&train, &rows, &config)?;
    show("scratch", &evaluate(&scratch, &test, &test_rows)?);

    let lbc = train_lbc(&train, &rows, 30.0, 5, &config)?;
    show("reweighting (a=30)", &evaluate(&lbc, &test, &test_rows)?);

    let hsic = train_fairhsic(&train, &rows, 100.0, &config)?;
    show("hsic penalty (l=100)", &evaluate(&hsic, &test, &test_rows)?);

    // The scratch model doubles as the distillation teacher.
    let mfd = train_mfd(&train, &rows, 1000.0, &scratch, &config)?;
    show("mmd distill (l=1000)", &evaluate(&mfd, &test, &test_rows)?);

    // Saved models round-trip through the JSON format.
    let out = std::path::Path::new("target/examples-out");
    std::fs::create_dir_all(out)?;
    let path = out.join("model.json");
    std::fs::write(&path, serde_json::to_string_pretty(&lbc.to_json())?)?;
    let loaded = fairpg::mlp::MlpModel::from_json(&serde_json::from_str(
        &std::fs::read_to_string(&path)?,
    )?)?;
    assert_eq!(loaded, lbc);
    println!("\nsaved and reloaded {}", path.display());
    Ok(())
}
