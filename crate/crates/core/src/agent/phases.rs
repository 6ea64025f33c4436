//! Training loops: uniform `(s, a)` updates and online interaction with
//! replay.

use rand::Rng;

use crate::agent::config::Exploration;
use crate::agent::explore::select_action;
use crate::agent::replay::ReplayBuffer;
use crate::agent::Learner;
use crate::error::{Error, Result};
use crate::mdp::{sample_step, uniform_sa_sampler, TabularMdp};
use crate::metrics::{Recorder, RunRecord, DEFAULT_HORIZON};

/// Draws `(s, a)` uniformly, samples `(r, s')` from the model and lets the
/// learner update on that single transition, `num_updates` times.
///
/// A record is taken every `recorder.record_interval` updates and after the
/// final one.
pub fn run_uniform_update_phase<L: Learner, R: Rng + ?Sized>(
    mdp: &TabularMdp,
    learner: &mut L,
    num_updates: u64,
    recorder: Option<&Recorder<'_>>,
    rng: &mut R,
) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for step in 1..=num_updates {
        let (s, a) = uniform_sa_sampler(mdp, rng)?;
        let t = sample_step(mdp, s, a, rng)?;
        learner.learn(&t, rng)?;
        if let Some(rec) = recorder {
            if rec.due(step, num_updates) {
                records.push(rec.record(step, learner)?);
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOptions {
    pub num_steps: u64,
    pub exploration: Exploration,
    pub batch_size: usize,
    pub shared_minibatch: bool,
    pub learning_starts: usize,
    /// Episodes are cut after this many steps.
    pub horizon: usize,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self {
            num_steps: 10_000,
            exploration: Exploration::default(),
            batch_size: 1,
            shared_minibatch: false,
            learning_starts: 1,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Interaction statistics from an online phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OnlineStats {
    /// Visits per `(s, a)`, row-major.
    pub visits: Vec<u64>,
    /// Discounted return of each completed or truncated episode.
    pub episode_returns: Vec<f64>,
}

/// Acts in the environment, stores transitions, and learns from replay
/// once `learning_starts` transitions are stored.
pub fn run_online_phase<L: Learner, R: Rng + ?Sized>(
    mdp: &TabularMdp,
    learner: &mut L,
    buffer: &mut ReplayBuffer,
    opts: &OnlineOptions,
    recorder: Option<&Recorder<'_>>,
    rng: &mut R,
) -> Result<(Vec<RunRecord>, OnlineStats)> {
    if buffer.capacity() < opts.batch_size {
        return Err(Error::usage("replay capacity is smaller than the batch size"));
    }
    let na = mdp.num_actions();
    let mut stats = OnlineStats { visits: vec![0; mdp.num_states() * na], episode_returns: Vec::new() };
    let mut records = Vec::new();
    let mut state = mdp.sample_start(rng);
    let (mut ep_len, mut ep_return, mut discount) = (0usize, 0.0, 1.0);

    for step in 1..=opts.num_steps {
        let action = select_action(learner.tables(), state, &opts.exploration, step - 1, rng);
        let t = sample_step(mdp, state, action, rng)?;
        stats.visits[state * na + action] += 1;
        ep_return += discount * t.reward;
        discount *= mdp.discount();
        ep_len += 1;
        buffer.push(t);

        if buffer.len() >= opts.learning_starts.max(1) {
            learner.learn_from_replay(buffer, opts.batch_size, opts.shared_minibatch, rng)?;
        }

        if t.is_terminal || ep_len >= opts.horizon {
            stats.episode_returns.push(ep_return);
            state = mdp.sample_start(rng);
            (ep_len, ep_return, discount) = (0, 0.0, 1.0);
        } else {
            state = t.next_state;
        }

        if let Some(rec) = recorder {
            if rec.due(step, opts.num_steps) {
                records.push(rec.record(step, learner)?);
            }
        }
    }
    Ok((records, stats))
}
