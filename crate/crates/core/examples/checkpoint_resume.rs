//! Saving an agent mid-run and resuming it bit for bit.
//!
//! ```text
//! cargo run --release --example checkpoint_resume
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uql::agent::{run_uniform_update_phase, AgentConfig, Checkpoint, InitValue, Learner, UqlAgent};
use uql::{Gridworld, GridworldSpec};

fn main() -> uql::Result<()> {
    let mdp = Gridworld::build(&GridworldSpec::default())?.mdp;
    let cfg = AgentConfig { ensemble_size: 4, init: InitValue::Uniform { low: 0.0, high: 1.0 }, ..Default::default() };

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut straight = UqlAgent::for_mdp(&mdp, cfg.clone(), &mut rng)?;
    run_uniform_update_phase(&mdp, &mut straight, 4000, None, &mut rng)?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut first = UqlAgent::for_mdp(&mdp, cfg.clone(), &mut rng)?;
    run_uniform_update_phase(&mdp, &mut first, 2000, None, &mut rng)?;
    let dir = std::env::temp_dir().join("uql-checkpoint-example");
    std::fs::create_dir_all(&dir).map_err(|e| uql::Error::Usage(e.to_string()))?;
    let path = dir.join("agent.ckpt");
    Checkpoint::capture(&first, 2000, &rng).save(&path)?;
    println!("saved {}", path.display());

    let ckpt = Checkpoint::load(&path)?;
    let mut dummy = ChaCha8Rng::seed_from_u64(0);
    let mut resumed = UqlAgent::for_mdp(&mdp, cfg, &mut dummy)?;
    let mut rng = ckpt.restore(&mut resumed)?;
    run_uniform_update_phase(&mdp, &mut resumed, 2000, None, &mut rng)?;

    let same = straight.tables().iter().zip(resumed.tables()).all(|(a, b)| {
        a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    println!("resumed at step {} and matched the uninterrupted run: {same}", ckpt.step);
    Ok(())
}
