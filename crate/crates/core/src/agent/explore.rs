use rand::Rng;

use crate::agent::config::Exploration;
use crate::mdp::{ActionId, StateId};
use crate::qtable::{argmax, mean_row, QTable};

/// Picks an action at `state` from the ensemble's statistics.
///
/// Greedy choices break ties toward the lowest action id. `step` drives the
/// epsilon schedule.
pub fn select_action<R: Rng + ?Sized>(
    tables: &[QTable],
    state: StateId,
    exploration: &Exploration,
    step: u64,
    rng: &mut R,
) -> ActionId {
    let na = tables[0].num_actions();
    match *exploration {
        Exploration::Uniform => rng.random_range(0..na),
        Exploration::EpsilonGreedy { start, end, decay_steps } => {
            let eps = Exploration::epsilon_at(start, end, decay_steps, step);
            if rng.random::<f64>() < eps {
                rng.random_range(0..na)
            } else {
                argmax(&mean_row(tables, state))
            }
        }
        Exploration::Ucb { lambda } => argmax(&ucb_scores(tables, state, lambda)),
    }
}

/// `mean + lambda * std` over members (population std).
pub fn ucb_scores(tables: &[QTable], state: StateId, lambda: f64) -> Vec<f64> {
    let mean = mean_row(tables, state);
    let k = tables.len() as f64;
    mean.iter()
        .enumerate()
        .map(|(a, m)| {
            let var = tables.iter().map(|t| (t.get(state, a) - m).powi(2)).sum::<f64>() / k;
            m + lambda * var.sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tables(rows: &[[f64; 2]]) -> Vec<QTable> {
        rows.iter().map(|r| QTable::from_values(1, 2, r.to_vec()).unwrap()).collect()
    }

    #[test]
    fn ucb_prefers_uncertain_action() {
        // mean = [1, 1], std = [0, 2]
        let t = tables(&[[1.0, -1.0], [1.0, 3.0]]);
        assert_eq!(ucb_scores(&t, 0, 1.0), vec![1.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&t, 0, &Exploration::Ucb { lambda: 1.0 }, 0, &mut rng), 1);
        // lambda = 0 is mean-greedy with low-id tie-break.
        assert_eq!(select_action(&t, 0, &Exploration::Ucb { lambda: 0.0 }, 0, &mut rng), 0);
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let t = vec![QTable::from_values(1, 4, vec![9.0, 0.0, 0.0, 0.0]).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            counts[select_action(&t, 0, &Exploration::epsilon(1.0), 0, &mut rng)] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 4.0 * sigma, "{counts:?}");
        }
        assert_eq!(select_action(&t, 0, &Exploration::epsilon(0.0), 0, &mut rng), 0);
    }
}
