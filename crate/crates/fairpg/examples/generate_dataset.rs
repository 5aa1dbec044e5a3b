//! Generate a synthetic biased dataset, mask its group labels, and write
//! the CSV files.
//!
//!     cargo run --example generate_dataset

use fairpg::data::partition_group_labeled;
use fairpg::synth::{generate, mask_groups, SynthSpec};

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
        seed: 7,
        ..SynthSpec::default()
    };
    let (train, test) = generate(&spec)?;
    println!(
        "generated {} train rows and {} test rows ({} features, {} classes, {} groups)",
        train.len(),
        test.len(),
        train.dim(),
        train.num_classes(),
        train.num_groups()
    );

    // The test split is exactly balanced over (group, class) cells.
    println!("\ntest cell counts:");
    for a in 0..test.num_groups() {
        let row: Vec<usize> = (0..test.num_classes())
            .map(|y| {
                (0..test.len())
                    .filter(|&r| test.group(r) == Some(a) && test.target(r) == y)
                    .count()
            })
            .collect();
        println!("  group {a}: {row:?}");
    }

    // Keep group labels on 10% of the training rows, stratified per cell.
    let masked = mask_groups(&train, 0.1, spec.seed)?;
    let (labeled, unlabeled) = partition_group_labeled(&masked);
    println!(
        "\nmasked to 10%: {} group-labeled rows, {} unlabeled rows",
        labeled.len(),
        unlabeled.len()
    );

    let out = std::path::Path::new("target/examples-out");
    std::fs::create_dir_all(out)?;
    masked.write_csv(&out.join("train.csv"))?;
    test.write_csv(&out.join("test.csv"))?;
    println!("wrote {}", out.join("train.csv").display());
    println!("wrote {}", out.join("test.csv").display());
    Ok(())
}
