//! Reference update rules: Q-learning, Double Q-learning, fixed-temperature
//! soft Q-learning and the ensemble-mean target.
//!
//! The free functions apply a single backup with an explicit step size. The
//! learner types wrap them with per-pair visit counts so they can be driven
//! by the same phase loops as [`crate::agent::UqlAgent`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Learner};
use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, Transition};
use crate::qtable::{argmax, mean_row, QTable};
use crate::soft::{mellowmax_unchecked, PriorPolicy};

/// Which reference rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineKind {
    QLearning,
    DoubleQ,
    /// Constant `beta`, or a linear move to `beta_end` over `anneal_updates`.
    SqlFixedBeta {
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta_end: Option<f64>,
        #[serde(default)]
        anneal_updates: u64,
    },
    EnsembleMean,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::QLearning => "q-learning",
            BaselineKind::DoubleQ => "double-q",
            BaselineKind::SqlFixedBeta { .. } => "sql-fixed-beta",
            BaselineKind::EnsembleMean => "ensemble-mean",
        }
    }

    pub fn validate(&self, ensemble_size: usize) -> Result<()> {
        match *self {
            BaselineKind::SqlFixedBeta { beta, beta_end, .. } => {
                if !(beta > 0.0) || beta.is_nan() {
                    return Err(Error::config("baseline.beta", "must be positive"));
                }
                if beta_end.is_some_and(|b| !(b > 0.0)) {
                    return Err(Error::config("baseline.beta_end", "must be positive"));
                }
            }
            BaselineKind::EnsembleMean if ensemble_size < 2 => {
                return Err(Error::config("agent.ensemble_size", "ensemble-mean needs at least 2 members"));
            }
            _ => {}
        }
        Ok(())
    }
}

fn backup(table: &mut QTable, t: &Transition, alpha: f64, target: f64) {
    let idx = t.state * table.num_actions() + t.action;
    let q = &mut table.values_mut()[idx];
    *q += alpha * (target - *q);
}

fn max_row(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `Q(s,a) += alpha (r + gamma max_a' Q(s',a') - Q(s,a))`; terminal target `r`.
pub fn q_learning_update(table: &mut QTable, t: &Transition, alpha: f64, gamma: f64) {
    let y = if t.is_terminal { t.reward } else { t.reward + gamma * max_row(table.row(t.next_state)) };
    backup(table, t, alpha, y);
}

/// Van Hasselt's tabular Double Q-learning step. A fair coin picks the
/// table to update; its argmax at `s'` is evaluated by the other table.
/// Returns `true` when `a` was updated.
pub fn double_q_update<R: Rng + ?Sized>(
    a: &mut QTable,
    b: &mut QTable,
    t: &Transition,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> bool {
    let pick_a = rng.random::<bool>();
    double_q_step(a, b, t, alpha, gamma, pick_a);
    pick_a
}

/// [`double_q_update`] with the coin already drawn.
pub fn double_q_step(a: &mut QTable, b: &mut QTable, t: &Transition, alpha: f64, gamma: f64, update_a: bool) {
    let (upd, other) = if update_a { (a, &*b) } else { (b, &*a) };
    let y = if t.is_terminal {
        t.reward
    } else {
        let best = argmax(upd.row(t.next_state));
        t.reward + gamma * other.get(t.next_state, best)
    };
    backup(upd, t, alpha, y);
}

/// Soft Q-learning with a fixed inverse temperature: the target reduces
/// next-state values with mellowmax at `w = 1/beta`.
pub fn sql_fixed_beta_update(table: &mut QTable, t: &Transition, alpha: f64, gamma: f64, beta: f64, prior: &[f64]) {
    let y = if t.is_terminal {
        t.reward
    } else {
        t.reward + gamma * mellowmax_unchecked(table.row(t.next_state), prior, 1.0 / beta)
    };
    backup(table, t, alpha, y);
}

/// Every member moves toward `r + gamma max_a mean_k Q_k(s', a)`.
pub fn ensemble_mean_update(members: &mut [QTable], t: &Transition, alpha: f64, gamma: f64) {
    let y = if t.is_terminal { t.reward } else { t.reward + gamma * max_row(&mean_row(members, t.next_state)) };
    for m in members {
        backup(m, t, alpha, y);
    }
}

/// A baseline rule applied to `K` tables (`2K` for Double Q) with per-table
/// visit counts.
#[derive(Debug, Clone)]
pub struct BaselineLearner {
    kind: BaselineKind,
    tables: Vec<QTable>,
    visits: Vec<Vec<u32>>,
    prior: PriorPolicy,
    cfg: AgentConfig,
    gamma: f64,
    updates: u64,
}

impl BaselineLearner {
    /// Tables are drawn from `cfg.init` in order; Double Q draws both tables
    /// of a pair before the next pair.
    pub fn for_mdp<R: Rng + ?Sized>(kind: BaselineKind, mdp: &TabularMdp, cfg: AgentConfig, rng: &mut R) -> Result<Self> {
        kind.validate(cfg.ensemble_size)?;
        let n = match kind {
            BaselineKind::DoubleQ => 2 * cfg.ensemble_size,
            _ => cfg.ensemble_size,
        };
        let tables: Vec<QTable> = (0..n).map(|_| cfg.init.table(mdp.terminal_flags(), mdp.num_actions(), rng)).collect();
        let cells = mdp.num_states() * mdp.num_actions();
        Ok(Self {
            kind,
            visits: vec![vec![0; cells]; n],
            tables,
            prior: PriorPolicy::uniform(mdp.num_states(), mdp.num_actions()),
            cfg,
            gamma: mdp.discount(),
            updates: 0,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    /// Inverse temperature used by the next sql-fixed-beta update.
    pub fn current_beta(&self) -> Option<f64> {
        match self.kind {
            BaselineKind::SqlFixedBeta { beta, beta_end, anneal_updates } => Some(match beta_end {
                Some(end) if anneal_updates > 0 => {
                    let frac = (self.updates as f64 / anneal_updates as f64).min(1.0);
                    beta + frac * (end - beta)
                }
                Some(end) => end,
                None => beta,
            }),
            _ => None,
        }
    }

    fn rate(&mut self, i: usize, t: &Transition) -> f64 {
        let idx = t.state * self.tables[i].num_actions() + t.action;
        let alpha = self.cfg.learning_rate.rate(self.visits[i][idx]);
        self.visits[i][idx] += 1;
        alpha
    }
}

impl Learner for BaselineLearner {
    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn learn<R: Rng + ?Sized>(&mut self, t: &Transition, rng: &mut R) -> Result<()> {
        let gamma = self.gamma;
        match self.kind {
            BaselineKind::QLearning => {
                for i in 0..self.tables.len() {
                    let alpha = self.rate(i, t);
                    q_learning_update(&mut self.tables[i], t, alpha, gamma);
                }
            }
            BaselineKind::DoubleQ => {
                for pair in 0..self.tables.len() / 2 {
                    let (left, right) = self.tables.split_at_mut(2 * pair + 1);
                    let (a, b) = (&mut left[2 * pair], &mut right[0]);
                    // Step size comes from the visit count of the table that is updated.
                    let pick_a = rng.random::<bool>();
                    let i = if pick_a { 2 * pair } else { 2 * pair + 1 };
                    let idx = t.state * a.num_actions() + t.action;
                    let alpha = self.cfg.learning_rate.rate(self.visits[i][idx]);
                    self.visits[i][idx] += 1;
                    double_q_step(a, b, t, alpha, gamma, pick_a);
                }
            }
            BaselineKind::SqlFixedBeta { .. } => {
                let beta = self.current_beta().unwrap_or(1.0);
                for i in 0..self.tables.len() {
                    let alpha = self.rate(i, t);
                    let prior = self.prior.row(t.next_state).to_vec();
                    sql_fixed_beta_update(&mut self.tables[i], t, alpha, gamma, beta, &prior);
                }
            }
            BaselineKind::EnsembleMean => {
                // Every member sees the same pair, so counts stay in step.
                let alpha = self.rate(0, t);
                for i in 1..self.tables.len() {
                    self.rate(i, t);
                }
                ensemble_mean_update(&mut self.tables, t, alpha, gamma);
            }
        }
        self.updates += 1;
        Ok(())
    }

    fn tables(&self) -> &[QTable] {
        &self.tables
    }
}
