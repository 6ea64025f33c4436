//! Every baseline on the same Gridworld and seed.
//!
//! ```text
//! cargo run --release --example baselines
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uql::agent::{run_uniform_update_phase, AgentConfig, InitValue, Learner};
use uql::baselines::{BaselineKind, BaselineLearner};
use uql::metrics::{estimate_bias, policy_agreement};
use uql::oracle::value_iteration;
use uql::{Gridworld, GridworldSpec};

fn main() -> uql::Result<()> {
    let world = Gridworld::build(&GridworldSpec::default())?;
    let mdp = &world.mdp;
    let truth = value_iteration(mdp, 1e-10);
    let probe = world.layout.state(0, 2).expect("open cell");
    let cfg = AgentConfig { ensemble_size: 10, init: InitValue::Uniform { low: 0.0, high: 1.0 }, ..Default::default() };

    let kinds = [
        BaselineKind::QLearning,
        BaselineKind::DoubleQ,
        BaselineKind::EnsembleMean,
        BaselineKind::SqlFixedBeta { beta: 50.0, beta_end: None, anneal_updates: 0 },
        BaselineKind::SqlFixedBeta { beta: 5.0, beta_end: Some(500.0), anneal_updates: 10_000 },
    ];
    println!("{:<16} {:>10} {:>10}", "baseline", "bias", "agreement");
    for kind in kinds {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut learner = BaselineLearner::for_mdp(kind, mdp, cfg.clone(), &mut rng)?;
        run_uniform_update_phase(mdp, &mut learner, 20_000, None, &mut rng)?;
        let est = learner.estimate();
        let bias = estimate_bias(&est, &truth, &[probe])?[0];
        let label = match kind {
            BaselineKind::SqlFixedBeta { beta, beta_end: Some(end), .. } => format!("sql beta {beta}->{end}"),
            BaselineKind::SqlFixedBeta { beta, .. } => format!("sql beta {beta}"),
            other => other.name().to_string(),
        };
        println!("{label:<16} {bias:>+10.4} {:>10.3}", policy_agreement(&est, &truth, mdp));
    }
    Ok(())
}
