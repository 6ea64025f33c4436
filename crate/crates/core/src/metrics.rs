//! Measurements against ground truth: bias, policy agreement, spread and
//! returns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Learner;
use crate::error::{Error, Result};
use crate::mdp::{sample_step, ActionId, StateId, TabularMdp, Transition};
use crate::oracle::{policy_evaluation, GroundTruth};
use crate::qtable::{spread, QTable};

/// Default rollout horizon cap.
pub const DEFAULT_HORIZON: usize = 400;

/// Metrics snapshot taken during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    pub probe_states: Vec<StateId>,
    /// `max_a mean_k Q_k(s, a)` at each probe state.
    pub probe_values: Vec<f64>,
    /// Probe value minus `V*(s)`.
    pub probe_bias: Vec<f64>,
    pub policy_agreement: f64,
    pub ensemble_spread: f64,
    /// `max_i ||Q_i - Q*||_inf` over all tables.
    pub max_member_error: f64,
    pub median_beta: Option<f64>,
    /// Exact discounted value of the greedy policy from the start states.
    pub greedy_return: f64,
}

impl RunRecord {
    pub fn mean_bias(&self) -> f64 {
        if self.probe_bias.is_empty() {
            0.0
        } else {
            self.probe_bias.iter().sum::<f64>() / self.probe_bias.len() as f64
        }
    }

    /// `(metric name, value)` pairs in a fixed order.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(2 * self.probe_states.len() + 6);
        for ((s, v), b) in self.probe_states.iter().zip(&self.probe_values).zip(&self.probe_bias) {
            out.push((format!("value[{s}]"), *v));
            out.push((format!("bias[{s}]"), *b));
        }
        out.push(("bias_mean".into(), self.mean_bias()));
        out.push(("policy_agreement".into(), self.policy_agreement));
        out.push(("spread".into(), self.ensemble_spread));
        out.push(("max_member_error".into(), self.max_member_error));
        if let Some(beta) = self.median_beta {
            out.push(("median_beta".into(), beta));
        }
        out.push(("greedy_return".into(), self.greedy_return));
        out
    }
}

/// Per-state bias `max_a Q(s, a) - V*(s)` of a (mean) table.
pub fn estimate_bias(estimate: &QTable, truth: &GroundTruth, probe_states: &[StateId]) -> Result<Vec<f64>> {
    probe_states
        .iter()
        .map(|&s| {
            if s >= truth.v_star.len() || s >= estimate.num_states() {
                return Err(Error::StateOutOfRange { state: s, num_states: truth.v_star.len() });
            }
            Ok(estimate.max_value(s) - truth.v_star[s])
        })
        .collect()
}

/// Fraction of non-terminal states whose greedy action is optimal.
pub fn policy_agreement(estimate: &QTable, truth: &GroundTruth, mdp: &TabularMdp) -> f64 {
    let states = mdp.non_terminal_states();
    if states.is_empty() {
        return 1.0;
    }
    let hits = states.iter().filter(|&&s| truth.is_optimal(s, estimate.greedy_action(s))).count();
    hits as f64 / states.len() as f64
}

pub fn greedy_policy(estimate: &QTable) -> Vec<ActionId> {
    (0..estimate.num_states()).map(|s| estimate.greedy_action(s)).collect()
}

/// Runs one episode of the greedy policy; stops at a terminal state or
/// after `horizon` steps.
pub fn rollout<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &[ActionId],
    start: StateId,
    horizon: usize,
    rng: &mut R,
) -> Result<(Vec<Transition>, f64)> {
    let mut state = start;
    let mut discount = 1.0;
    let mut ret = 0.0;
    let mut path = Vec::new();
    for _ in 0..horizon {
        if mdp.is_terminal(state) {
            break;
        }
        let t = sample_step(mdp, state, policy[state], rng)?;
        ret += discount * t.reward;
        discount *= mdp.discount();
        state = t.next_state;
        path.push(t);
    }
    Ok((path, ret))
}

/// Initial-state bias of the greedy mean-ensemble policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialStateBias {
    /// Mean of `V_hat(s0) - R(xi)` over rollouts.
    pub monte_carlo: f64,
    pub std_error: f64,
    /// `V_hat(s0) - V^pi(s0)` via exact policy evaluation.
    pub exact: f64,
}

/// Rollout-based bias proxy plus its exact counterpart. Start states are
/// drawn from the MDP's start distribution.
pub fn initial_state_bias<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    estimate: &QTable,
    num_rollouts: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<InitialStateBias> {
    if num_rollouts == 0 {
        return Err(Error::usage("need at least one rollout"));
    }
    let policy = greedy_policy(estimate);
    let v_pi = policy_evaluation(mdp, &policy, 1e-12);
    let mut diffs = Vec::with_capacity(num_rollouts);
    let mut exact = 0.0;
    for _ in 0..num_rollouts {
        let s0 = mdp.sample_start(rng);
        let (_, ret) = rollout(mdp, &policy, s0, horizon, rng)?;
        diffs.push(estimate.max_value(s0) - ret);
        exact += estimate.max_value(s0) - v_pi[s0];
    }
    let n = num_rollouts as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = if num_rollouts > 1 {
        diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(InitialStateBias { monte_carlo: mean, std_error: (var / n).sqrt(), exact: exact / n })
}

/// Collects [`RunRecord`]s at a fixed cadence.
#[derive(Debug, Clone)]
pub struct Recorder<'a> {
    pub mdp: &'a TabularMdp,
    pub truth: &'a GroundTruth,
    pub probe_states: Vec<StateId>,
    pub record_interval: u64,
    pub track_beta: bool,
}

impl<'a> Recorder<'a> {
    pub fn new(mdp: &'a TabularMdp, truth: &'a GroundTruth, probe_states: Vec<StateId>, record_interval: u64) -> Result<Self> {
        if record_interval == 0 {
            return Err(Error::usage("record interval must be at least 1"));
        }
        for &s in &probe_states {
            mdp.check_state(s)?;
        }
        Ok(Self { mdp, truth, probe_states, record_interval, track_beta: true })
    }

    pub fn due(&self, step: u64, last: u64) -> bool {
        step.is_multiple_of(self.record_interval) || step == last
    }

    pub fn record<L: Learner>(&self, step: u64, learner: &L) -> Result<RunRecord> {
        let estimate = learner.estimate();
        let probe_bias = estimate_bias(&estimate, self.truth, &self.probe_states)?;
        let probe_values = self.probe_states.iter().map(|&s| estimate.max_value(s)).collect();
        let policy = greedy_policy(&estimate);
        let v_pi = policy_evaluation(self.mdp, &policy, 1e-10);
        let starts = self.mdp.start_states();
        let greedy_return = starts.iter().map(|&s| v_pi[s]).sum::<f64>() / starts.len() as f64;
        let record = RunRecord {
            step,
            probe_states: self.probe_states.clone(),
            probe_values,
            probe_bias,
            policy_agreement: policy_agreement(&estimate, self.truth, self.mdp),
            ensemble_spread: spread(learner.tables()),
            max_member_error: learner.tables().iter().map(|t| t.sup_distance(&self.truth.q_star)).fold(0.0, f64::max),
            median_beta: if self.track_beta { learner.median_beta(self.mdp) } else { None },
            greedy_return,
        };
        if record.metrics().iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite metric at step {step}")));
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{build_gridworld, GridworldSpec};
    use crate::oracle::value_iteration;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn det_gridworld() -> TabularMdp {
        build_gridworld(&GridworldSpec { slip_prob: 0.0, ..GridworldSpec::default() }).unwrap()
    }

    #[test]
    fn exact_q_star_has_zero_bias_and_full_agreement() {
        let mdp = build_gridworld(&GridworldSpec::default()).unwrap();
        let truth = value_iteration(&mdp, 1e-11);
        let all: Vec<StateId> = (0..mdp.num_states()).collect();
        assert!(estimate_bias(&truth.q_star, &truth, &all).unwrap().iter().all(|b| *b == 0.0));
        assert_eq!(policy_agreement(&truth.q_star, &truth, &mdp), 1.0);
        let shifted = truth.q_star.map(|v| v + 0.3);
        for b in estimate_bias(&shifted, &truth, &all).unwrap() {
            assert!((b - 0.3).abs() < 1e-12);
        }
        assert!(matches!(estimate_bias(&truth.q_star, &truth, &[999]), Err(Error::StateOutOfRange { .. })));
    }

    #[test]
    fn negated_optimum_disagrees_everywhere() {
        // Two actions: action 0 ends with reward 1, action 1 ends with reward 0.
        let p = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::new(2, 2, p, vec![1.0, 0.0, 0.0, 0.0], 0.9, vec![false, true]).unwrap();
        let truth = value_iteration(&mdp, 1e-12);
        assert_eq!(policy_agreement(&truth.q_star.map(|v| -v), &truth, &mdp), 0.0);
    }

    #[test]
    fn greedy_rollouts_of_q_star_are_unbiased_on_deterministic_grid() {
        let mdp = det_gridworld();
        let truth = value_iteration(&mdp, 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bias = initial_state_bias(&mdp, &truth.q_star, 20, DEFAULT_HORIZON, &mut rng).unwrap();
        assert!(bias.monte_carlo.abs() < 1e-9, "{bias:?}");
        assert!(bias.exact.abs() < 1e-9);
    }

    #[test]
    fn zero_horizon_returns_estimate() {
        let mdp = det_gridworld();
        let truth = value_iteration(&mdp, 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bias = initial_state_bias(&mdp, &truth.q_star, 5, 0, &mut rng).unwrap();
        let s0 = mdp.start_states()[0];
        assert!((bias.monte_carlo - truth.v_star[s0]).abs() < 1e-12);
    }

    #[test]
    fn agreement_is_invariant_under_positive_affine_maps() {
        let mdp = build_gridworld(&GridworldSpec::default()).unwrap();
        let truth = value_iteration(&mdp, 1e-11);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let q = QTable::random_uniform(mdp.num_states(), 8, -1.0, 1.0, &mut rng);
            let base = policy_agreement(&q, &truth, &mdp);
            let scale = 0.1 + 5.0 * rng.random::<f64>();
            let shift = -3.0 + 6.0 * rng.random::<f64>();
            assert_eq!(policy_agreement(&q.map(|v| scale * v + shift), &truth, &mdp), base);
        }
    }
}
