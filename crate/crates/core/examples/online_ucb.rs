//! Online interaction with replay memory and UCB exploration over the
//! ensemble.
//!
//! ```text
//! cargo run --release --example online_ucb
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uql::agent::{run_online_phase, AgentConfig, Exploration, InitValue, OnlineOptions, ReplayBuffer, UqlAgent};
use uql::metrics::Recorder;
use uql::oracle::value_iteration;
use uql::{Gridworld, GridworldSpec};

const MAP: &str = "\
S...
.#..
...#
#..G";

fn main() -> uql::Result<()> {
    let world = Gridworld::build(&GridworldSpec::with_map(MAP))?;
    let mdp = &world.mdp;
    let truth = value_iteration(mdp, 1e-10);
    let start = mdp.start_states()[0];
    let recorder = Recorder::new(mdp, &truth, vec![start], 2000)?;

    for exploration in [Exploration::Ucb { lambda: 1.0 }, Exploration::epsilon(0.1)] {
        let cfg = AgentConfig {
            ensemble_size: 5,
            exploration,
            init: InitValue::Uniform { low: 0.0, high: 1.0 },
            batch_size: 4,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = UqlAgent::for_mdp(mdp, cfg.clone(), &mut rng)?;
        let mut buffer = ReplayBuffer::new(cfg.replay_capacity)?;
        let opts = OnlineOptions {
            num_steps: 10_000,
            exploration,
            batch_size: cfg.batch_size,
            learning_starts: 100,
            horizon: 100,
            ..Default::default()
        };
        let (records, stats) = run_online_phase(mdp, &mut agent, &mut buffer, &opts, Some(&recorder), &mut rng)?;
        let last = records.last().expect("records");
        let unvisited = stats.visits.iter().filter(|v| **v == 0).count();
        println!(
            "{exploration:?}: {} episodes, bias at start {:+.4}, agreement {:.3}, greedy return {:.4} (V* {:.4}), {unvisited} pairs never tried",
            stats.episode_returns.len(),
            last.probe_bias[0],
            last.policy_agreement,
            last.greedy_return,
            truth.v_star[start],
        );
    }
    Ok(())
}
