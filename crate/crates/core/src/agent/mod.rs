//! The ensemble agent, its configuration, and the training loops.

pub mod checkpoint;
pub mod config;
pub mod explore;
pub mod phases;
pub mod replay;
pub mod uql;

use rand::Rng;

use crate::error::Result;
use crate::mdp::{TabularMdp, Transition};
use crate::qtable::{mean_of, QTable};

pub use checkpoint::Checkpoint;
pub use config::{AgentConfig, Exploration, InitValue, LearningRate};
pub use explore::{select_action, ucb_scores};
pub use phases::{run_online_phase, run_uniform_update_phase, OnlineOptions, OnlineStats};
pub use replay::ReplayBuffer;
pub use uql::{uql_target, UqlAgent};

/// Anything trained by the phase drivers: the ensemble agent and every
/// baseline.
pub trait Learner {
    fn name(&self) -> &'static str;

    /// Applies one transition to every table.
    fn learn<R: Rng + ?Sized>(&mut self, t: &Transition, rng: &mut R) -> Result<()>;

    /// One online step of learning from replay memory. The default draws a
    /// single minibatch and learns from it transition by transition.
    fn learn_from_replay<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        _shared: bool,
        rng: &mut R,
    ) -> Result<()> {
        for t in buffer.sample(batch_size, rng)? {
            self.learn(&t, rng)?;
        }
        Ok(())
    }

    /// All tables whose mean is the value estimate.
    fn tables(&self) -> &[QTable];

    fn estimate(&self) -> QTable {
        mean_of(self.tables())
    }

    /// Median solved inverse temperature, for learners that solve one.
    fn median_beta(&self, _mdp: &TabularMdp) -> Option<f64> {
        None
    }
}
