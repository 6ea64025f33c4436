//! Probe-state bias of the ensemble agent against Q-learning on the
//! default Gridworld, sampling state-action pairs uniformly.
//!
//! ```text
//! cargo run --release --example bias_comparison
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uql::agent::{run_uniform_update_phase, AgentConfig, InitValue, UqlAgent};
use uql::baselines::{BaselineKind, BaselineLearner};
use uql::metrics::Recorder;
use uql::oracle::value_iteration;
use uql::{Gridworld, GridworldSpec};

fn main() -> uql::Result<()> {
    let world = Gridworld::build(&GridworldSpec::default())?;
    let mdp = &world.mdp;
    let truth = value_iteration(mdp, 1e-10);
    let probe = world.layout.state(0, 2).expect("open cell");
    let recorder = Recorder::new(mdp, &truth, vec![probe], 1000)?;

    let cfg = AgentConfig {
        ensemble_size: 20,
        init: InitValue::Uniform { low: 0.0, high: 1.0 },
        solver: uql::BetaSolverConfig::default().with_kappa(0.5),
        ..Default::default()
    };
    let updates = 10_000;
    let seed = 3;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = BaselineLearner::for_mdp(BaselineKind::QLearning, mdp, cfg.clone(), &mut rng)?;
    let q_records = run_uniform_update_phase(mdp, &mut q, updates, Some(&recorder), &mut rng)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = UqlAgent::for_mdp(mdp, cfg, &mut rng)?;
    let u_records = run_uniform_update_phase(mdp, &mut agent, updates, Some(&recorder), &mut rng)?;

    println!("V*(probe) = {:.4}", truth.v_star[probe]);
    println!("{:>6}  {:>12}  {:>12}  {:>10}", "step", "bias Q", "bias UQL", "beta med");
    for (a, b) in q_records.iter().zip(&u_records) {
        println!(
            "{:>6}  {:>+12.4}  {:>+12.4}  {:>10.3e}",
            a.step,
            a.probe_bias[0],
            b.probe_bias[0],
            b.median_beta.unwrap_or(f64::NAN)
        );
    }
    let last = (q_records.last().unwrap(), u_records.last().unwrap());
    println!("policy agreement: Q {:.3}, UQL {:.3}", last.0.policy_agreement, last.1.policy_agreement);
    Ok(())
}
