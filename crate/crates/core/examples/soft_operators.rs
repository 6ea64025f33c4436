//! Mellowmax across temperatures and the reductions used for TD targets.
//!
//! ```text
//! cargo run --release --example soft_operators
//! ```

use uql::{mellowmax, reduce_next_state, soft_greedy_policy, Reduction};

fn main() -> uql::Result<()> {
    let q = [1.0, 0.5, -0.25, 0.9];
    let prior = [0.25; 4];

    println!("q = {q:?}, uniform prior");
    println!("{:>10}  {:>10}", "w", "mellowmax");
    for w in [0.0, 0.01, 0.1, 0.5, 1.0, 10.0, 1e6, f64::INFINITY] {
        println!("{w:>10}  {:>10.6}", mellowmax(&q, &prior, w)?);
    }

    let beta = 4.0;
    let pi = soft_greedy_policy(&q, &prior, beta)?;
    println!("\nsoft-greedy policy at beta = {beta}: {pi:.3?}");

    println!("\nreductions at beta = {beta}:");
    for op in Reduction::ALL {
        for kappa in [0.5, 1.0, f64::INFINITY] {
            println!("  {:<20} kappa {kappa:<4} -> {:.6}", op.name(), reduce_next_state(&q, &prior, beta, kappa, op)?);
        }
    }
    Ok(())
}
