//! Finite MDPs: dense transition kernels, sampling, and random instances.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;

/// Rows of the transition kernel must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// One sampled environment step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
    /// Whether `next_state` is terminal.
    pub is_terminal: bool,
}

/// A finite MDP with dense `p(s'|s,a)` and mean rewards `r(s,a)`.
///
/// Terminal states self-loop with probability one and zero reward under
/// every action.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward_mean: Vec<f64>,
    reward_noise_std: f64,
    discount: f64,
    terminal: Vec<bool>,
    start_states: Vec<StateId>,
    non_terminal: Vec<StateId>,
    // Nonzero entries of each (s,a) row as (next_state, cumulative prob).
    support: Vec<Vec<(StateId, f64)>>,
}

impl TabularMdp {
    /// Builds and validates an MDP.
    ///
    /// `transition` is laid out as `[s][a][s']` and `reward_mean` as `[s][a]`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward_mean: Vec<f64>,
        discount: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Mdp("need at least one state and one action".into()));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::Mdp(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if reward_mean.len() != num_states * num_actions {
            return Err(Error::Mdp(format!(
                "reward table has {} entries, expected {}",
                reward_mean.len(),
                num_states * num_actions
            )));
        }
        if terminal.len() != num_states {
            return Err(Error::Mdp("terminal flags must have one entry per state".into()));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Mdp(format!("discount {discount} must lie in [0, 1)")));
        }
        if reward_mean.iter().any(|r| !r.is_finite()) {
            return Err(Error::Mdp("rewards must be finite".into()));
        }

        let mut support = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = &transition[(s * num_actions + a) * num_states..][..num_states];
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::Mdp(format!("row ({s},{a}) has a negative or non-finite entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::Mdp(format!("row ({s},{a}) sums to {sum}")));
                }
                if terminal[s] && (row[s] != 1.0 || reward_mean[s * num_actions + a] != 0.0) {
                    return Err(Error::Mdp(format!(
                        "terminal state {s} must self-loop with zero reward under action {a}"
                    )));
                }
                let mut acc = 0.0;
                let mut entries: Vec<(StateId, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(next, p)| {
                        acc += p;
                        (next, acc)
                    })
                    .collect();
                if let Some(last) = entries.last_mut() {
                    last.1 = f64::INFINITY;
                }
                support.push(entries);
            }
        }

        let non_terminal: Vec<StateId> = (0..num_states).filter(|&s| !terminal[s]).collect();
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward_mean,
            reward_noise_std: 0.0,
            discount,
            start_states: non_terminal.clone(),
            non_terminal,
            terminal,
            support,
        })
    }

    /// Additive Gaussian noise on sampled rewards.
    pub fn with_reward_noise(mut self, std: f64) -> Result<Self> {
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::Mdp(format!("reward noise std {std} must be finite and >= 0")));
        }
        self.reward_noise_std = std;
        Ok(self)
    }

    /// Episode start distribution (uniform over the given states).
    pub fn with_start_states(mut self, starts: Vec<StateId>) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::Mdp("start state set is empty".into()));
        }
        for &s in &starts {
            self.check_state(s)?;
            if self.terminal[s] {
                return Err(Error::Mdp(format!("start state {s} is terminal")));
            }
        }
        self.start_states = starts;
        Ok(self)
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Mdp(format!("discount {discount} must lie in [0, 1)")));
        }
        self.discount = discount;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward_noise_std(&self) -> f64 {
        self.reward_noise_std
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    pub fn non_terminal_states(&self) -> &[StateId] {
        &self.non_terminal
    }

    pub fn start_states(&self) -> &[StateId] {
        &self.start_states
    }

    pub fn reward_mean(&self, s: StateId, a: ActionId) -> f64 {
        self.reward_mean[s * self.num_actions + a]
    }

    /// `p(.|s,a)` as a dense slice of length `num_states`.
    pub fn transition_row(&self, s: StateId, a: ActionId) -> &[f64] {
        &self.transition[(s * self.num_actions + a) * self.num_states..][..self.num_states]
    }

    /// Nonzero successors of `(s,a)` with their probabilities.
    pub fn successors(&self, s: StateId, a: ActionId) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.transition_row(s, a)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(next, p)| (next, *p))
    }

    pub fn check_state(&self, s: StateId) -> Result<()> {
        if s < self.num_states {
            Ok(())
        } else {
            Err(Error::StateOutOfRange {
                state: s,
                num_states: self.num_states,
            })
        }
    }

    pub fn check_action(&self, a: ActionId) -> Result<()> {
        if a < self.num_actions {
            Ok(())
        } else {
            Err(Error::ActionOutOfRange {
                action: a,
                num_actions: self.num_actions,
            })
        }
    }

    /// Draws a start state uniformly from the start set.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> StateId {
        self.start_states[rng.random_range(0..self.start_states.len())]
    }
}

/// Samples `(r, s')` for taking `action` in `state`.
///
/// Terminal states return a zero-reward self-loop without consuming
/// randomness.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    state: StateId,
    action: ActionId,
    rng: &mut R,
) -> Result<Transition> {
    mdp.check_state(state)?;
    mdp.check_action(action)?;
    if mdp.terminal[state] {
        return Ok(Transition {
            state,
            action,
            reward: 0.0,
            next_state: state,
            is_terminal: true,
        });
    }
    let row = &mdp.support[state * mdp.num_actions + action];
    let next_state = if row.len() == 1 {
        row[0].0
    } else {
        let u: f64 = rng.random();
        row.iter().find(|(_, cum)| u < *cum).map(|(s, _)| *s).unwrap_or(row[row.len() - 1].0)
    };
    let mut reward = mdp.reward_mean(state, action);
    if mdp.reward_noise_std > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        reward += mdp.reward_noise_std * z;
    }
    Ok(Transition {
        state,
        action,
        reward,
        next_state,
        is_terminal: mdp.terminal[next_state],
    })
}

/// Draws `(s, a)` uniformly over non-terminal states and all actions.
pub fn uniform_sa_sampler<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> Result<(StateId, ActionId)> {
    let n = mdp.non_terminal.len();
    if n == 0 {
        return Err(Error::usage("mdp has no non-terminal states"));
    }
    let k = rng.random_range(0..n * mdp.num_actions);
    Ok((mdp.non_terminal[k / mdp.num_actions], k % mdp.num_actions))
}

/// Parameters for a random finite MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    /// Number of distinct successors per `(s, a)`; clamped to the state count.
    #[serde(default = "default_branching")]
    pub branching: usize,
    #[serde(default = "default_reward_low")]
    pub reward_low: f64,
    #[serde(default = "default_reward_high")]
    pub reward_high: f64,
    #[serde(default = "default_random_discount")]
    pub discount: f64,
    #[serde(default)]
    pub reward_noise_std: f64,
    /// Seed for the MDP itself, independent of run seeds.
    #[serde(default)]
    pub seed: u64,
}

fn default_branching() -> usize {
    3
}
fn default_reward_low() -> f64 {
    0.0
}
fn default_reward_high() -> f64 {
    1.0
}
fn default_random_discount() -> f64 {
    0.9
}

impl RandomMdpSpec {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            branching: default_branching(),
            reward_low: default_reward_low(),
            reward_high: default_reward_high(),
            discount: default_random_discount(),
            reward_noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Samples a random MDP without terminal states.
///
/// Each `(s, a)` row puts random normalized mass on `branching` distinct
/// successors; mean rewards are uniform on `[reward_low, reward_high)`.
pub fn random_mdp<R: Rng + ?Sized>(spec: &RandomMdpSpec, rng: &mut R) -> Result<TabularMdp> {
    let (ns, na) = (spec.num_states, spec.num_actions);
    if ns == 0 || na == 0 {
        return Err(Error::Mdp("need at least one state and one action".into()));
    }
    if !(spec.reward_low <= spec.reward_high) {
        return Err(Error::Mdp("reward_low must not exceed reward_high".into()));
    }
    let branching = spec.branching.clamp(1, ns);
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    let mut order: Vec<StateId> = (0..ns).collect();
    for s in 0..ns {
        for a in 0..na {
            // Partial Fisher-Yates to pick distinct successors.
            for i in 0..branching {
                let j = rng.random_range(i..ns);
                order.swap(i, j);
            }
            let weights: Vec<f64> = (0..branching).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = weights.iter().sum();
            let row = &mut transition[(s * na + a) * ns..][..ns];
            for (i, w) in weights.iter().enumerate() {
                row[order[i]] = w / total;
            }
            // Put rounding residue on the largest entry so the row sums to one.
            let sum: f64 = row.iter().sum();
            let imax = (0..ns).max_by(|&x, &y| row[x].total_cmp(&row[y])).unwrap_or(0);
            row[imax] += 1.0 - sum;
            reward[s * na + a] = spec.reward_low + (spec.reward_high - spec.reward_low) * rng.random::<f64>();
        }
    }
    TabularMdp::new(ns, na, transition, reward, spec.discount, vec![false; ns])?
        .with_reward_noise(spec.reward_noise_std)
}
