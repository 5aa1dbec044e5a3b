//! Run the confidence-based group-label assignment pipeline and inspect
//! what it produced.
//!
//!     cargo run --example cgl_assignment

use fairpg::cgl::{run_cgl_pipeline, AssignmentPolicy, Provenance};
use fairpg::synth::{generate, mask_groups, SynthSpec};
use fairpg::train::TrainConfig;

fn main() -> fairpg::Result<()> {
    let spec = SynthSpec {
        num_classes: 3,
        num_groups: 4,
        class_sep: 2.0,
        group_shift: 4.0,
        group_marker: 1.2,
        majority_fraction: Some(0.4),
        n_train: 1200,
        n_test: 960,
        seed: 11,
        ..SynthSpec::default()
    };
    let (train, _) = generate(&spec)?;
    // Hidden truth for accuracy bookkeeping below.
    let truth: Vec<usize> = (0..train.len()).map(|r| train.group(r).unwrap()).collect();
    let masked = mask_groups(&train, 0.1, 5)?;

    // A logistic group model: margin-based confidences order well.
    let group_config = TrainConfig {
        epochs: 80,
        lr: 0.02,
        hidden: 0,
        batch_size: 32,
        ..TrainConfig::default()
    };

    let (assignment, diagnostics) = run_cgl_pipeline(
        &masked,
        AssignmentPolicy::Cgl { tau: None },
        &group_config,
        42,
        None,
    )?;

    println!("labeled rows:          {}", diagnostics.n_labeled);
    println!("unlabeled rows:        {}", diagnostics.n_unlabeled);
    println!(
        "validation group acc:  {:.4}",
        diagnostics.val_group_accuracy.unwrap()
    );
    println!("searched threshold:    {:.4}", diagnostics.tau.unwrap());
    println!(
        "threshold rule acc:    {:.4}  (predicting correct vs wrong)",
        diagnostics.threshold_rule_accuracy.unwrap()
    );

    let confident = assignment
        .provenance
        .iter()
        .filter(|&&p| p == Provenance::Confident)
        .count();
    println!(
        "\nassigned {} rows: {} trusted argmax, {} randomized from P(A|Y)",
        assignment.len(),
        confident,
        assignment.len() - confident
    );

    // How accurate were the two branches against the hidden truth?
    let branch_accuracy = |wanted: Provenance| {
        let mut hit = 0;
        let mut total = 0;
        for i in 0..assignment.len() {
            if assignment.provenance[i] == wanted {
                total += 1;
                if assignment.pseudo_groups[i] == truth[assignment.rows[i]] {
                    hit += 1;
                }
            }
        }
        hit as f64 / total.max(1) as f64
    };
    println!(
        "trusted-branch label accuracy:    {:.4}",
        branch_accuracy(Provenance::Confident)
    );
    println!(
        "randomized-branch label accuracy: {:.4}",
        branch_accuracy(Provenance::Randomized)
    );

    println!("\nconfidence histogram (bucket width 0.05):");
    for (i, count) in diagnostics.confidence_histogram.iter().enumerate() {
        if *count > 0 {
            println!(
                "  [{:.2}, {:.2}): {}",
                i as f64 * 0.05,
                (i + 1) as f64 * 0.05,
                count
            );
        }
    }

    let out = std::path::Path::new("target/examples-out");
    std::fs::create_dir_all(out)?;
    assignment.write_csv(&out.join("assignment.csv"))?;
    println!("\nwrote {}", out.join("assignment.csv").display());
    Ok(())
}
