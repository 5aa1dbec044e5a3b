//! How the confidence threshold is chosen: maximize the count of trusted
//! correct predictions plus rejected incorrect ones on a validation split.
//!
//!     cargo run --example threshold_search

use fairpg::cgl::search_threshold_scored;
use fairpg::rng::SeededRng;

fn objective(scored: &[(f64, bool)], tau: f64) -> f64 {
    scored
        .iter()
        .map(|&(c, ok)| if c > tau { ok as u64 as f64 } else { (!ok) as u64 as f64 })
        .sum()
}

fn main() {
    // A hand-sized case first.
    let scored = vec![(0.95, true), (0.90, true), (0.60, false), (0.55, false)];
    let (tau, best) = search_threshold_scored(&scored);
    println!("4-point case: tau = {tau}, objective = {best} of {}", scored.len());
    for t in [0.0, 0.55, 0.60, 0.75, 0.90, 1.0] {
        println!("  objective({t:.2}) = {}", objective(&scored, t));
    }

    // A larger simulated validation set where confidence tracks correctness.
    let mut rng = SeededRng::new(9);
    let scored: Vec<(f64, bool)> = (0..400)
        .map(|_| {
            let conf: f64 = 0.25 + 0.75 * rng.uniform();
            (conf, rng.uniform() < conf)
        })
        .collect();
    let (tau, best) = search_threshold_scored(&scored);
    let correct = scored.iter().filter(|&&(_, ok)| ok).count();
    println!("\n400 simulated points ({correct} correct):");
    println!("  chosen tau = {tau:.4}; objective = {best}");
    println!("  trust-everything objective  = {}", objective(&scored, 0.0));
    println!("  reject-everything objective = {}", objective(&scored, 1.0));
    println!(
        "  rule accuracy at tau = {:.4}",
        best / scored.len() as f64
    );
}
