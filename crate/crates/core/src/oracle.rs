//! Exact dynamic-programming oracles: hard and soft value iteration, and
//! policy evaluation.

use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::qtable::QTable;
use crate::soft::{mellowmax_unchecked, PriorPolicy};

const MAX_SWEEPS: usize = 1_000_000;

/// Optimal values of an MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub q_star: QTable,
    pub v_star: Vec<f64>,
    /// Optimal action set per state. Actions within `tie_tol` of the
    /// maximum count as optimal.
    pub pi_star: Vec<Vec<ActionId>>,
    pub tie_tol: f64,
}

impl GroundTruth {
    pub fn from_q(q_star: QTable, tie_tol: f64) -> Self {
        let v_star: Vec<f64> = (0..q_star.num_states()).map(|s| q_star.max_value(s)).collect();
        let pi_star = (0..q_star.num_states())
            .map(|s| {
                q_star
                    .row(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| **q >= v_star[s] - tie_tol)
                    .map(|(a, _)| a)
                    .collect()
            })
            .collect();
        Self { q_star, v_star, pi_star, tie_tol }
    }

    pub fn is_optimal(&self, s: StateId, a: ActionId) -> bool {
        self.pi_star[s].contains(&a)
    }
}

/// `r(s,a) + gamma * sum_s' p(s'|s,a) * next_value(s')`.
fn backup_with(mdp: &TabularMdp, next_value: &[f64]) -> QTable {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut out = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let ev: f64 = mdp.successors(s, a).map(|(next, p)| p * next_value[next]).sum();
            out.set(s, a, mdp.reward_mean(s, a) + gamma * ev);
        }
    }
    out
}

/// The soft Bellman operator `B_w` applied exactly through the model.
///
/// `w = 0` is the hard optimality operator; `w = inf` evaluates the prior.
pub fn soft_bellman_backup(mdp: &TabularMdp, q: &QTable, prior: &PriorPolicy, w: f64) -> QTable {
    let next_value: Vec<f64> = (0..mdp.num_states())
        .map(|s| mellowmax_unchecked(q.row(s), prior.row(s), w))
        .collect();
    backup_with(mdp, &next_value)
}

/// The hard Bellman optimality operator.
pub fn bellman_backup(mdp: &TabularMdp, q: &QTable) -> QTable {
    let next_value: Vec<f64> = (0..mdp.num_states()).map(|s| q.max_value(s)).collect();
    backup_with(mdp, &next_value)
}

fn iterate_to_fixed_point(mdp: &TabularMdp, tol: f64, op: impl Fn(&QTable) -> QTable) -> QTable {
    let gamma = mdp.discount();
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions());
    if gamma == 0.0 {
        return op(&q);
    }
    let threshold = tol * (1.0 - gamma) / gamma;
    for _ in 0..MAX_SWEEPS {
        let next = op(&q);
        let residual = next.sup_distance(&q);
        q = next;
        if residual <= threshold {
            break;
        }
    }
    q
}

/// Hard value iteration to `||Q - Q*||_inf <= tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> GroundTruth {
    let q = iterate_to_fixed_point(mdp, tol, |q| bellman_backup(mdp, q));
    GroundTruth::from_q(q, (10.0 * tol).max(1e-9))
}

/// Fixed point `Q*_w` of the soft operator at temperature `w`.
pub fn soft_value_iteration(mdp: &TabularMdp, prior: &PriorPolicy, w: f64, tol: f64) -> QTable {
    iterate_to_fixed_point(mdp, tol, |q| soft_bellman_backup(mdp, q, prior, w))
}

/// State values of a deterministic policy, to `tol`.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &[ActionId], tol: f64) -> Vec<f64> {
    let gamma = mdp.discount();
    let ns = mdp.num_states();
    let mut v = vec![0.0; ns];
    let threshold = if gamma == 0.0 { f64::INFINITY } else { tol * (1.0 - gamma) / gamma };
    for _ in 0..MAX_SWEEPS {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                let a = policy[s];
                let ev: f64 = mdp.successors(s, a).map(|(n, p)| p * v[n]).sum();
                mdp.reward_mean(s, a) + gamma * ev
            })
            .collect();
        let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if residual <= threshold {
            break;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{build_gridworld, GridworldSpec};
    use crate::mdp::{random_mdp, RandomMdpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// s0 -> s1 -> T with rewards (0, 1), single action.
    pub(crate) fn chain(gamma: f64) -> TabularMdp {
        let p = vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        TabularMdp::new(3, 1, p, vec![0.0, 1.0, 0.0], gamma, vec![false, false, true]).unwrap()
    }

    #[test]
    fn single_step_to_terminal() {
        for gamma in [0.0, 0.5, 0.99] {
            let p = vec![0.0, 1.0, 0.0, 1.0];
            let mdp = TabularMdp::new(2, 1, p, vec![1.0, 0.0], gamma, vec![false, true]).unwrap();
            let truth = value_iteration(&mdp, 1e-10);
            assert!((truth.v_star[0] - 1.0).abs() <= 1e-10);
            assert_eq!(truth.v_star[1], 0.0);
        }
    }

    #[test]
    fn two_step_chain() {
        let truth = value_iteration(&chain(0.9), 1e-12);
        assert!((truth.v_star[0] - 0.9).abs() <= 1e-12);
        assert!((truth.v_star[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn residual_contract_holds() {
        let mdp = build_gridworld(&GridworldSpec::default()).unwrap();
        let tol = 1e-8;
        let truth = value_iteration(&mdp, tol);
        let residual = bellman_backup(&mdp, &truth.q_star).sup_distance(&truth.q_star);
        let gamma = mdp.discount();
        assert!(residual <= tol * (1.0 - gamma) / gamma);
    }

    #[test]
    fn soft_iteration_limits() {
        let mdp = build_gridworld(&GridworldSpec::default()).unwrap();
        let prior = PriorPolicy::uniform(mdp.num_states(), mdp.num_actions());
        let hard = value_iteration(&mdp, 1e-10);
        let soft0 = soft_value_iteration(&mdp, &prior, 0.0, 1e-10);
        assert!(soft0.sup_distance(&hard.q_star) <= 1e-8);
        let tiny = soft_value_iteration(&mdp, &prior, 1e-12, 1e-10);
        assert!(tiny.sup_distance(&hard.q_star) <= 1e-8);

        // w = inf is evaluation of the uniform prior: Q = r + gamma P mean(Q).
        let q_inf = soft_value_iteration(&mdp, &prior, f64::INFINITY, 1e-11);
        let gamma = mdp.discount();
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                let ev: f64 = mdp
                    .successors(s, a)
                    .map(|(n, p)| p * q_inf.row(n).iter().sum::<f64>() / mdp.num_actions() as f64)
                    .sum();
                assert!((q_inf.get(s, a) - mdp.reward_mean(s, a) - gamma * ev).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn soft_fixed_point_is_monotone_in_temperature() {
        let mdp = random_mdp(&RandomMdpSpec::new(6, 3), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let prior = PriorPolicy::uniform(6, 3);
        let tables: Vec<QTable> = [0.0, 0.1, 1.0, 10.0]
            .iter()
            .map(|&w| soft_value_iteration(&mdp, &prior, w, 1e-11))
            .collect();
        for pair in tables.windows(2) {
            for (hi, lo) in pair[0].values().iter().zip(pair[1].values()) {
                assert!(hi + 1e-9 >= *lo);
            }
        }
        let moved = soft_bellman_backup(&mdp, &tables[2], &prior, 1.0).sup_distance(&tables[2]);
        assert!(moved <= 1e-11);
    }

    #[test]
    fn policy_evaluation_of_optimal_policy_recovers_v_star() {
        let mdp = build_gridworld(&GridworldSpec::default()).unwrap();
        let truth = value_iteration(&mdp, 1e-11);
        let policy: Vec<ActionId> = (0..mdp.num_states()).map(|s| truth.q_star.greedy_action(s)).collect();
        let v = policy_evaluation(&mdp, &policy, 1e-11);
        for (a, b) in v.iter().zip(&truth.v_star) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}
