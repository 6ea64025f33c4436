use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qtable::QTable;
use crate::soft::BetaSolverConfig;

/// Step size as a function of how often a pair has been updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearningRate {
    Constant { alpha: f64 },
    /// `alpha_n = scale / (n + offset)^power` for the `n`-th update of a pair
    /// (counting from zero).
    Polynomial { scale: f64, offset: f64, power: f64 },
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::Constant { alpha: 0.1 }
    }
}

impl LearningRate {
    /// `1 / (1 + n)^0.8`: satisfies the Robbins-Monro conditions.
    pub fn robbins_monro() -> Self {
        LearningRate::Polynomial { scale: 1.0, offset: 1.0, power: 0.8 }
    }

    #[inline]
    pub fn rate(&self, visits: u32) -> f64 {
        match *self {
            LearningRate::Constant { alpha } => alpha,
            LearningRate::Polynomial { scale, offset, power } => scale / (visits as f64 + offset).powf(power),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningRate::Constant { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::config("agent.learning_rate.alpha", "must lie in (0, 1]"));
                }
            }
            LearningRate::Polynomial { scale, offset, power } => {
                if !(power > 0.5 && power <= 1.0) {
                    return Err(Error::config(
                        "agent.learning_rate.power",
                        "must lie in (0.5, 1] so that sum alpha = inf and sum alpha^2 < inf",
                    ));
                }
                if !(offset > 0.0 && scale > 0.0 && scale / offset.powf(power) <= 1.0) {
                    return Err(Error::config(
                        "agent.learning_rate",
                        "scale and offset must be positive with scale / offset^power <= 1",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Behaviour policy for online interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Exploration {
    /// Epsilon decays linearly from `start` to `end` over `decay_steps`.
    EpsilonGreedy { start: f64, end: f64, decay_steps: u64 },
    /// Greedy on `mean + lambda * std` across ensemble members.
    Ucb { lambda: f64 },
    Uniform,
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration::Ucb { lambda: 1.0 }
    }
}

impl Exploration {
    pub fn epsilon(eps: f64) -> Self {
        Exploration::EpsilonGreedy { start: eps, end: eps, decay_steps: 0 }
    }

    pub fn epsilon_at(start: f64, end: f64, decay_steps: u64, step: u64) -> f64 {
        if decay_steps == 0 || step >= decay_steps {
            end
        } else {
            start + (end - start) * step as f64 / decay_steps as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Exploration::EpsilonGreedy { start, end, .. } => {
                if !((0.0..=1.0).contains(&start) && (0.0..=1.0).contains(&end)) {
                    return Err(Error::config("agent.exploration", "epsilon must lie in [0, 1]"));
                }
            }
            Exploration::Ucb { lambda } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::config("agent.exploration.lambda", "must be finite and >= 0"));
                }
            }
            Exploration::Uniform => {}
        }
        Ok(())
    }
}

/// Initial table values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitValue {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for InitValue {
    fn default() -> Self {
        InitValue::Constant { value: 0.0 }
    }
}

impl InitValue {
    /// Builds one table; terminal rows are always zero.
    pub fn table<R: Rng + ?Sized>(&self, terminal: &[bool], num_actions: usize, rng: &mut R) -> QTable {
        let ns = terminal.len();
        let mut table = match *self {
            InitValue::Constant { value } => QTable::filled(ns, num_actions, value),
            InitValue::Uniform { low, high } => QTable::random_uniform(ns, num_actions, low, high, rng),
        };
        for (s, _) in terminal.iter().enumerate().filter(|(_, t)| **t) {
            table.row_mut(s).fill(0.0);
        }
        table
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitValue::Constant { value } if !value.is_finite() => {
                Err(Error::config("agent.init.value", "must be finite"))
            }
            InitValue::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low <= high) => {
                Err(Error::config("agent.init", "uniform range needs finite low <= high"))
            }
            _ => Ok(()),
        }
    }
}

/// Settings shared by the ensemble agent and the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// Number of ensemble members `K` (independent tables for baselines).
    pub ensemble_size: usize,
    pub learning_rate: LearningRate,
    pub solver: BetaSolverConfig,
    /// Updates between target snapshots `Q_bar <- Q`.
    pub target_sync_interval: u64,
    pub exploration: Exploration,
    pub init: InitValue,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions collected before online learning starts.
    pub learning_starts: usize,
    /// Give every member the same minibatch instead of independent ones.
    pub shared_minibatch: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 5,
            learning_rate: LearningRate::default(),
            solver: BetaSolverConfig::default(),
            target_sync_interval: 1,
            exploration: Exploration::default(),
            init: InitValue::default(),
            batch_size: 1,
            replay_capacity: 10_000,
            learning_starts: 1,
            shared_minibatch: false,
        }
    }
}

impl AgentConfig {
    pub fn kappa(&self) -> f64 {
        self.solver.kappa
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::config("agent.ensemble_size", "must be at least 1"));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::config("agent.target_sync_interval", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("agent.batch_size", "must be at least 1"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::config("agent.replay_capacity", "must be at least batch_size"));
        }
        self.learning_rate.validate()?;
        self.solver.validate()?;
        self.exploration.validate()?;
        self.init.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_rate_schedule() {
        let lr = LearningRate::robbins_monro();
        assert_eq!(lr.rate(0), 1.0);
        assert!((lr.rate(9) - 10f64.powf(-0.8)).abs() < 1e-15);
        assert!(lr.validate().is_ok());
        let bad = LearningRate::Polynomial { scale: 1.0, offset: 1.0, power: 0.5 };
        assert!(bad.validate().is_err());
        assert!(LearningRate::Constant { alpha: 1.5 }.validate().is_err());
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        assert_eq!(Exploration::epsilon_at(1.0, 0.1, 10, 0), 1.0);
        assert!((Exploration::epsilon_at(1.0, 0.1, 10, 5) - 0.55).abs() < 1e-15);
        assert_eq!(Exploration::epsilon_at(1.0, 0.1, 10, 50), 0.1);
    }

    #[test]
    fn init_zeroes_terminal_rows() {
        let mut rng = rand::rng();
        let t = InitValue::Uniform { low: 1.0, high: 2.0 }.table(&[false, true], 3, &mut rng);
        assert!(t.row(0).iter().all(|v| (1.0..2.0).contains(v)));
        assert_eq!(t.row(1), &[0.0; 3]);
    }

    #[test]
    fn config_validation_names_fields() {
        let cfg = AgentConfig { replay_capacity: 0, batch_size: 4, ..Default::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("agent.replay_capacity"), "{err}");
    }
}
