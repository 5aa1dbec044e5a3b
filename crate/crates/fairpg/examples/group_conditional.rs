//! The empirical conditional P(A | Y): what random group assignment draws
//! from, with the marginal fallback for classes without labeled rows.
//!
//!     cargo run --example group_conditional

use fairpg::conditional::{empirical_conditional, sample_group, sample_group_or_marginal};
use fairpg::data::partition_group_labeled;
use fairpg::rng::SeededRng;
use fairpg::synth::{generate, mask_groups, SynthSpec};

fn main() -> fairpg::Result<()> {
    let spec = SynthSpec {
        num_classes: 3,
        num_groups: 4,
        majority_fraction: Some(0.4),
        n_train: 2000,
        n_test: 120,
        seed: 13,
        ..SynthSpec::default()
    };
    let (train, _) = generate(&spec)?;
    let masked = mask_groups(&train, 0.25, 3)?;
    let (labeled, _) = partition_group_labeled(&masked);

    let table = empirical_conditional(&masked, &labeled)?;
    println!("empirical P(A | Y) over {} labeled rows:", labeled.len());
    for y in 0..table.num_classes() {
        let row: Vec<String> = table.row(y).iter().map(|p| format!("{p:.3}")).collect();
        println!("  y={y}: [{}]  counts {:?}", row.join(", "), table.counts(y));
    }
    println!(
        "marginal P(A): {:?}",
        table
            .marginal()
            .iter()
            .map(|p| format!("{p:.3}"))
            .collect::<Vec<_>>()
    );

    // Draw sequences are reproducible for a fixed seed.
    let mut rng = SeededRng::new(99);
    let draws: Vec<usize> = (0..12).map(|_| sample_group(&table, 0, &mut rng).unwrap()).collect();
    println!("\n12 draws from P(A | Y=0), seed 99: {draws:?}");
    let mut rng = SeededRng::new(99);
    let again: Vec<usize> = (0..12).map(|_| sample_group(&table, 0, &mut rng).unwrap()).collect();
    assert_eq!(draws, again);

    // Empirical frequencies converge to the table row.
    let mut rng = SeededRng::new(7);
    let mut counts = vec![0usize; table.num_groups()];
    let n = 100_000;
    for _ in 0..n {
        counts[sample_group_or_marginal(&table, 1, &mut rng)] += 1;
    }
    let freq: Vec<String> = counts
        .iter()
        .map(|&c| format!("{:.3}", c as f64 / n as f64))
        .collect();
    println!("frequencies after {n} draws from P(A | Y=1): [{}]", freq.join(", "));
    Ok(())
}
