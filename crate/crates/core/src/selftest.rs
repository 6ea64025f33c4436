//! Randomized property checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{run_uniform_update_phase, AgentConfig, InitValue, Learner, ReplayBuffer, UqlAgent};
use crate::baselines::{BaselineKind, BaselineLearner};
use crate::gridworld::{build_gridworld, GridworldSpec};
use crate::mdp::{random_mdp, RandomMdpSpec, Transition};
use crate::oracle::{bellman_backup, soft_bellman_backup, soft_value_iteration, value_iteration};
use crate::qtable::{spread, QTable};
use crate::soft::{discrepancy, mellowmax, solve_beta_detailed, BetaOutcome, BetaSolverConfig, PriorPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, failures: usize, trials: usize, worst: String) -> Self {
        Check { name, passed: failures == 0, detail: format!("{}/{trials} ok; {worst}", trials - failures) }
    }
}

/// A random strictly positive distribution over `n` actions.
pub fn random_prior<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn random_values<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// Limits, monotonicity in `w`, translation equivariance and the
/// prior-mean/max bounds on random vectors.
pub fn mellowmax_suite(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-10;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(1..=8);
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let v = random_values(n, scale, &mut rng);
        let p = random_prior(n, &mut rng);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean: f64 = v.iter().zip(&p).map(|(a, b)| a * b).sum();
        let mm = |w: f64| mellowmax(&v, &p, w).expect("valid input");
        let mut err = (mm(0.0) - max).abs().max((mm(f64::INFINITY) - mean).abs() / scale.max(1.0));
        let ws: Vec<f64> = (0..8).map(|_| 10f64.powf(rng.random_range(-4.0..4.0)) * scale).collect();
        let mut sorted = ws.clone();
        sorted.sort_by(f64::total_cmp);
        let vals: Vec<f64> = sorted.iter().map(|&w| mm(w)).collect();
        for pair in vals.windows(2) {
            err = err.max((pair[1] - pair[0]) / scale.max(1.0));
        }
        let c = scale * (2.0 * rng.random::<f64>() - 1.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for &w in &ws {
            let m = mm(w);
            let ms = mellowmax(&shifted, &p, w).expect("valid input");
            err = err.max(((ms - m - c).abs()) / (scale.max(1.0) + c.abs()));
            err = err.max((mean - m) / scale.max(1.0)).max((m - max) / scale.max(1.0));
        }
        worst = worst.max(err);
        if err > tol {
            failures += 1;
        }
    }
    Check::new("mellowmax analytic properties", failures, trials, format!("worst relative violation {worst:.3e}"))
}

/// `||B_w Q_i - B_w Q_j|| <= gamma ||Q_i - Q_j|| + 1e-10` on random MDPs.
pub fn contraction_suite(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut spec = RandomMdpSpec::new(rng.random_range(2..=6), rng.random_range(1..=4));
        spec.discount = rng.random_range(0.0..0.99);
        let mdp = random_mdp(&spec, &mut rng).expect("valid spec");
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let prior = PriorPolicy::from_rows((0..ns).map(|_| random_prior(na, &mut rng)).collect()).expect("prior");
        let scale = 10f64.powf(rng.random_range(-1.0..2.0));
        let qi = QTable::random_uniform(ns, na, -scale, scale, &mut rng);
        let qj = QTable::random_uniform(ns, na, -scale, scale, &mut rng);
        let w = match rng.random_range(0..4) {
            0 => 0.0,
            1 => f64::INFINITY,
            _ => 10f64.powf(rng.random_range(-3.0..3.0)),
        };
        let lhs = soft_bellman_backup(&mdp, &qi, &prior, w).sup_distance(&soft_bellman_backup(&mdp, &qj, &prior, w));
        let rhs = mdp.discount() * qi.sup_distance(&qj);
        worst = worst.max(lhs - rhs);
        if lhs > rhs + 1e-10 {
            failures += 1;
        }
    }
    Check::new("soft Bellman contraction", failures, trials, format!("max lhs - rhs {worst:.3e}"))
}

/// Bound on the solved temperature for ensembles with spread `eps`.
pub fn w_star_bound(eps: f64, prior: &[f64]) -> f64 {
    let min = prior.iter().copied().fold(f64::INFINITY, f64::min);
    2.0 * eps / -(1.0 - min).ln()
}

/// A random ensemble of `k` rows within `eps` of a base row whose top two
/// actions differ by at least `gap`.
pub fn near_ensemble<R: Rng + ?Sized>(k: usize, n: usize, eps: f64, gap: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let base = loop {
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut s = b.clone();
        s.sort_by(|a, b| b.total_cmp(a));
        if s[0] - s[1] >= gap {
            break b;
        }
    };
    (0..k).map(|_| base.iter().map(|x| x + eps * (rng.random::<f64>() - 0.5)).collect()).collect()
}

/// Solved `w* = 1/beta*` against its small-spread bound.
pub fn w_star_suite(trials_per_eps: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = BetaSolverConfig::default();
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        for _ in 0..trials_per_eps {
            let n = rng.random_range(2..=8);
            let k = rng.random_range(2..=10);
            let rows = near_ensemble(k, n, eps, 0.1, &mut rng);
            let prior = random_prior(n, &mut rng);
            let tables: Vec<QTable> = rows.iter().map(|r| QTable::from_values(1, n, r.clone()).expect("row")).collect();
            let measured = spread(&tables);
            let sol = solve_beta_detailed(&rows, &prior, &cfg).expect("valid rows");
            let excess = 1.0 / sol.beta - (w_star_bound(measured, &prior) + 1e-6);
            worst = worst.max(excess);
            if excess > 0.0 {
                failures += 1;
            }
        }
    }
    Check::new("solved temperature bound", failures, 3 * trials_per_eps, format!("max w* - bound {worst:.3e}"))
}

/// Random rows with an interior root: |f(beta*)| small.
pub fn solver_suite(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = BetaSolverConfig::default();
    let (mut done, mut failures, mut worst) = (0, 0, 0.0f64);
    while done < trials {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(2..=10);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| random_values(n, 1.0, &mut rng)).collect();
        let prior = random_prior(n, &mut rng);
        let f = |b: f64| discrepancy(&rows, &prior, b).expect("valid rows");
        if !(f(cfg.beta_min) < 0.0 && f(cfg.beta_max) > 0.0) {
            continue;
        }
        done += 1;
        let sol = solve_beta_detailed(&rows, &prior, &cfg).expect("valid rows");
        let r = f(sol.beta).abs();
        worst = worst.max(r);
        if sol.outcome != BetaOutcome::Interior || r > 1e-6 {
            failures += 1;
        }
    }
    Check::new("temperature solver residual", failures, trials, format!("max |f(beta*)| {worst:.3e}"))
}

/// Hardmax single-member agent versus Q-learning, bit for bit.
pub fn degeneration_check(updates: u64, seed: u64) -> Check {
    let mdp = build_gridworld(&GridworldSpec::default()).expect("default map");
    let cfg = AgentConfig {
        ensemble_size: 1,
        init: InitValue::Uniform { low: 0.0, high: 1.0 },
        solver: BetaSolverConfig::default().with_kappa(f64::INFINITY),
        ..Default::default()
    };
    let (mut r1, mut r2) = (ChaCha8Rng::seed_from_u64(seed), ChaCha8Rng::seed_from_u64(seed));
    let mut run = || -> crate::Result<(QTable, QTable)> {
        let mut uql = UqlAgent::for_mdp(&mdp, cfg.clone(), &mut r1)?;
        let mut ql = BaselineLearner::for_mdp(BaselineKind::QLearning, &mdp, cfg.clone(), &mut r2)?;
        run_uniform_update_phase(&mdp, &mut uql, updates, None, &mut r1)?;
        run_uniform_update_phase(&mdp, &mut ql, updates, None, &mut r2)?;
        Ok((uql.tables()[0].clone(), ql.tables()[0].clone()))
    };
    let (a, b) = run().expect("default gridworld run");
    let diff = a.values().iter().zip(b.values()).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    Check::new("hardmax single member equals Q-learning", usize::from(diff > 0), 1, format!("{diff} differing cells"))
}

/// Value iteration residual contract and the `w = 0` soft limit.
pub fn oracle_suite(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-8;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut spec = RandomMdpSpec::new(rng.random_range(2..=8), rng.random_range(1..=4));
        spec.discount = rng.random_range(0.1..0.95);
        let mdp = random_mdp(&spec, &mut rng).expect("valid spec");
        let truth = value_iteration(&mdp, tol);
        let g = mdp.discount();
        let residual = bellman_backup(&mdp, &truth.q_star).sup_distance(&truth.q_star);
        let prior = PriorPolicy::uniform(mdp.num_states(), mdp.num_actions());
        let soft = soft_value_iteration(&mdp, &prior, 0.0, tol);
        let err = (residual / (tol * (1.0 - g) / g)).max(soft.sup_distance(&truth.q_star) / (2.0 * tol));
        worst = worst.max(err);
        if err > 1.0 {
            failures += 1;
        }
    }
    Check::new("value iteration contract", failures, trials, format!("worst normalized error {worst:.3}"))
}

/// FIFO eviction and the capacity bound.
pub fn replay_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let trials = 200;
    for _ in 0..trials {
        let cap = rng.random_range(1..50);
        let pushes = rng.random_range(0..200);
        let mut buf = ReplayBuffer::new(cap).expect("positive capacity");
        for i in 0..pushes {
            buf.push(Transition { state: i, action: 0, reward: 0.0, next_state: 0, is_terminal: false });
        }
        let kept: Vec<usize> = buf.iter().map(|t| t.state).collect();
        let expected: Vec<usize> = (pushes.saturating_sub(cap)..pushes).collect();
        if kept != expected || buf.len() > cap {
            failures += 1;
        }
    }
    Check::new("replay FIFO", failures, trials, String::from("capacity and order"))
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        mellowmax_suite(10_000, seed),
        contraction_suite(1000, seed),
        w_star_suite(100, seed),
        solver_suite(10_000, seed),
        degeneration_check(10_000, seed),
        oracle_suite(50, seed),
        replay_check(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for check in [
            mellowmax_suite(300, 1),
            contraction_suite(100, 1),
            w_star_suite(10, 1),
            solver_suite(200, 1),
            degeneration_check(500, 1),
            oracle_suite(5, 1),
            replay_check(1),
        ] {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn near_ensemble_respects_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows = near_ensemble(5, 4, 1e-3, 0.1, &mut rng);
        let tables: Vec<QTable> = rows.into_iter().map(|r| QTable::from_values(1, 4, r).unwrap()).collect();
        assert!(spread(&tables) <= 1e-3);
    }
}
