//! Solving the inverse temperature for one next state of an ensemble.
//!
//! The solved `beta` makes the mean mellowmax of the members equal the
//! max of the mean table; wider disagreement gives a hotter (smaller) beta.
//! Members that agree on the top action need no correction, so beta stays
//! at the top of the bracket.
//!
//! ```text
//! cargo run --release --example solve_temperature
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uql::soft::solve_beta_detailed;
use uql::{discrepancy, mellowmax, BetaSolverConfig};

fn main() -> uql::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let prior = [0.25; 4];
    let base = [1.0, 0.6, 0.2, 0.0];
    let cfg = BetaSolverConfig::default();

    println!("{:>8}  {:>12}  {:>12}  {:>10}  {:>6}", "noise", "beta*", "f(beta*)", "outcome", "iters");
    for noise in [0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.5] {
        let rows: Vec<Vec<f64>> =
            (0..10).map(|_| base.iter().map(|v| v + noise * rng.random_range(-1.0..1.0)).collect()).collect();
        let sol = solve_beta_detailed(&rows, &prior, &cfg)?;
        let f = discrepancy(&rows, &prior, sol.beta)?;
        println!("{noise:>8}  {:>12.5e}  {f:>12.3e}  {:>10?}  {:>6}", sol.beta, sol.outcome, sol.iterations);
    }

    // The root condition, checked by hand for one noisy ensemble.
    let rows: Vec<Vec<f64>> =
        (0..10).map(|_| base.iter().map(|v| v + 0.5 * rng.random_range(-1.0..1.0)).collect()).collect();
    let beta = solve_beta_detailed(&rows, &prior, &cfg)?.beta;
    let mean_mm = rows.iter().map(|r| mellowmax(r, &prior, 1.0 / beta)).sum::<uql::Result<f64>>()? / rows.len() as f64;
    let max_mean = (0..4).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / rows.len() as f64).fold(f64::MIN, f64::max);
    println!("\nmean mellowmax {mean_mm:.9} vs max of mean {max_mean:.9}");
    Ok(())
}
