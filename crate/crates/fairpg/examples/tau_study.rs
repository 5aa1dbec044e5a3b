//! Sweep the confidence threshold at a fixed trainer and ratio. The
//! endpoints reproduce the pseudo-label (tau = 0) and random-label
//! (tau = 1) baselines exactly; the interesting values sit in between.
//!
//!     cargo run --example tau_study

use fairpg::cgl::AssignmentPolicy;
use fairpg::harness::{benchmark_config, emit_tau_study, run_tau_study, Format, TrainerGrid};

fn main() -> fairpg::Result<()> {
    let mut config = benchmark_config();
    config.policies = vec![AssignmentPolicy::Cgl { tau: None }];
    config.trainers = vec![TrainerGrid::FairHsic { lambdas: vec![30.0] }];
    config.seeds = (0..4).collect(); // trimmed for example runtime

    let taus = [0.0, 0.25, 0.5, 0.75, 0.9, 1.0];
    let study = run_tau_study(&config, &taus)?;

    println!(
        "{:<14} {:>16}  {:>16}",
        "assignment", "accuracy", "delta_m"
    );
    for entry in &study.entries {
        println!(
            "{:<14} {:>7.4} (±{:.3})  {:>7.4} (±{:.3})",
            entry.label,
            entry.accuracy_mean,
            entry.accuracy_std,
            entry.delta_m_mean,
            entry.delta_m_std
        );
    }

    let tau0 = study.entries.iter().find(|e| e.label == "tau_0").unwrap();
    let pseudo = study
        .entries
        .iter()
        .find(|e| e.label == "pseudo_label")
        .unwrap();
    assert_eq!(tau0.delta_m_mean, pseudo.delta_m_mean);
    println!("\ntau=0 row equals the pseudo-label row exactly (shared streams)");

    let out = std::path::Path::new("target/examples-out/tau-study");
    let files = emit_tau_study(&study, &[Format::Csv, Format::Svg], out)?;
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(())
}
