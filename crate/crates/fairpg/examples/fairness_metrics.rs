//! Train a plain classifier and measure its equalized-odds disparity.
//!
//!     cargo run --example fairness_metrics

use fairpg::fairtrain::train_scratch;
use fairpg::metrics::evaluate;
use fairpg::synth::{generate, SynthSpec};
use fairpg::train::TrainConfig;

fn main() -> fairpg::Result<()> {
    let spec = SynthSpec {
        class_sep: 2.0,
        group_shift: 4.0,
        group_marker: 0.8,
        n_train: 900,
        n_test: 800,
        seed: 3,
        ..SynthSpec::default()
    };
    let (train, test) = generate(&spec)?;

    let config = TrainConfig {
        epochs: 30,
        lr: 0.01,
        hidden: 16,
        batch_size: 64,
        seed: 1,
        ..TrainConfig::default()
    };
    let model = train_scratch(&train, &train.all_rows(), &config)?;
    let report = evaluate(&model, &test, &test.all_rows())?;

    println!("accuracy: {:.4}", report.accuracy);
    println!("delta_m:  {:.4}  (worst per-class accuracy gap between groups)", report.delta_m);
    println!("delta_a:  {:.4}  (class-averaged gap)", report.delta_a);

    println!("\nper-(group, class) accuracy:");
    for (a, row) in report.table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&report.support[a])
            .map(|(acc, n)| format!("{acc:.3} (n={n})"))
            .collect();
        println!("  group {a}: {}", cells.join("  "));
    }

    println!("\nreport as JSON:\n{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
