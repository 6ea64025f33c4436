//! Tabular unbiased soft Q-learning.
//!
//! An ensemble of Q tables is trained with a mellowmax target whose
//! temperature is solved per next state so that the ensemble's mean soft
//! value matches the max of its mean. Classical baselines, exact value
//! iteration, and bias/policy metrics sit alongside so every estimate can
//! be compared to ground truth.

pub mod agent;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod gridworld;
pub mod mdp;
pub mod metrics;
pub mod oracle;
pub mod qtable;
pub mod selftest;
pub mod soft;

pub use error::{Error, Result};
pub use gridworld::{build_gridworld, Gridworld, GridworldSpec};
pub use mdp::{sample_step, uniform_sa_sampler, ActionId, StateId, TabularMdp, Transition};
pub use qtable::{QEnsemble, QTable};
pub use soft::{
    discrepancy, mellowmax, reduce_next_state, soft_greedy_policy, solve_beta, BetaSolverConfig, PriorPolicy,
    Reduction,
};
