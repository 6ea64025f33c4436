//! All members converging to Q* on a small random MDP with a decaying
//! step size.
//!
//! ```text
//! cargo run --release --example convergence
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uql::agent::{run_uniform_update_phase, AgentConfig, InitValue, LearningRate, UqlAgent};
use uql::mdp::{random_mdp, RandomMdpSpec};
use uql::metrics::Recorder;
use uql::oracle::value_iteration;

fn main() -> uql::Result<()> {
    let mut spec = RandomMdpSpec::new(5, 2);
    spec.discount = 0.8;
    let mdp = random_mdp(&spec, &mut ChaCha8Rng::seed_from_u64(7))?;
    let truth = value_iteration(&mdp, 1e-12);
    let recorder = Recorder::new(&mdp, &truth, vec![0], 50_000)?;
    let cfg = AgentConfig {
        ensemble_size: 5,
        learning_rate: LearningRate::Polynomial { scale: 1.0, offset: 1.0, power: 0.7 },
        init: InitValue::Uniform { low: 0.0, high: 1.0 / (1.0 - spec.discount) },
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = UqlAgent::for_mdp(&mdp, cfg, &mut rng)?;
    let records = run_uniform_update_phase(&mdp, &mut agent, 500_000, Some(&recorder), &mut rng)?;
    println!("{:>8}  {:>14}  {:>10}", "step", "max |Q_i - Q*|", "spread");
    for r in records {
        println!("{:>8}  {:>14.3e}  {:>10.3e}", r.step, r.max_member_error, r.ensemble_spread);
    }
    Ok(())
}
