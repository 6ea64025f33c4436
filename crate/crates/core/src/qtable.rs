//! Tabular action-value functions and ensembles of them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};

/// Dense `|S| x |A|` table of action values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    /// Entries drawn uniformly from `[low, high)`.
    pub fn random_uniform<R: Rng + ?Sized>(num_states: usize, num_actions: usize, low: f64, high: f64, rng: &mut R) -> Self {
        let values = (0..num_states * num_actions)
            .map(|_| low + (high - low) * rng.random::<f64>())
            .collect();
        Self { num_states, num_actions, values }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::usage(format!(
                "table needs {} values, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("table entries must be finite"));
        }
        Ok(Self { num_states, num_actions, values })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s * self.num_actions..][..self.num_actions]
    }

    pub fn row_mut(&mut self, s: StateId) -> &mut [f64] {
        &mut self.values[s * self.num_actions..][..self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_value(&self, s: StateId) -> f64 {
        self.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action at `s`, lowest id on ties.
    pub fn greedy_action(&self, s: StateId) -> ActionId {
        argmax(self.row(s))
    }

    /// Sup-norm distance to another table of the same shape.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Index of the first maximal entry.
pub fn argmax(values: &[f64]) -> ActionId {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `K` member tables plus their target snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEnsemble {
    members: Vec<QTable>,
    targets: Vec<QTable>,
}

impl QEnsemble {
    pub fn new(members: Vec<QTable>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::usage("ensemble needs at least one member"))?;
        let shape = (first.num_states, first.num_actions);
        if members.iter().any(|m| (m.num_states, m.num_actions) != shape) {
            return Err(Error::usage("ensemble members differ in shape"));
        }
        Ok(Self {
            targets: members.clone(),
            members,
        })
    }

    pub fn from_parts(members: Vec<QTable>, targets: Vec<QTable>) -> Result<Self> {
        let mut e = Self::new(members)?;
        if targets.len() != e.members.len() || targets.iter().zip(&e.members).any(|(t, m)| t.values.len() != m.values.len()) {
            return Err(Error::usage("target tables must match members"));
        }
        e.targets = targets;
        Ok(e)
    }

    pub fn zeros(k: usize, num_states: usize, num_actions: usize) -> Result<Self> {
        Self::new(vec![QTable::zeros(num_states, num_actions); k])
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn num_states(&self) -> usize {
        self.members[0].num_states
    }

    pub fn num_actions(&self) -> usize {
        self.members[0].num_actions
    }

    pub fn members(&self) -> &[QTable] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [QTable] {
        &mut self.members
    }

    pub fn targets(&self) -> &[QTable] {
        &self.targets
    }

    /// `Q_bar <- Q` for every member.
    pub fn sync_targets(&mut self) {
        for (t, m) in self.targets.iter_mut().zip(&self.members) {
            t.values.copy_from_slice(&m.values);
        }
    }

    /// Empirical mean over members.
    pub fn mean_table(&self) -> QTable {
        mean_of(&self.members)
    }

    pub fn mean_row(&self, s: StateId) -> Vec<f64> {
        mean_row(&self.members, s)
    }

    /// Population standard deviation over members at `s`.
    pub fn std_row(&self, s: StateId) -> Vec<f64> {
        let mean = self.mean_row(s);
        let k = self.k() as f64;
        (0..self.num_actions())
            .map(|a| {
                let var = self.members.iter().map(|m| (m.get(s, a) - mean[a]).powi(2)).sum::<f64>() / k;
                var.sqrt()
            })
            .collect()
    }

    /// Ensemble spread `max_ij ||Q_i - Q_j||_inf`.
    pub fn spread(&self) -> f64 {
        spread(&self.members)
    }
}

/// Entrywise mean of equally shaped tables.
pub fn mean_of(tables: &[QTable]) -> QTable {
    let mut out = QTable::zeros(tables[0].num_states, tables[0].num_actions);
    for t in tables {
        for (o, v) in out.values.iter_mut().zip(&t.values) {
            *o += v;
        }
    }
    let k = tables.len() as f64;
    out.values.iter_mut().for_each(|v| *v /= k);
    out
}

pub fn mean_row(tables: &[QTable], s: StateId) -> Vec<f64> {
    let na = tables[0].num_actions;
    let mut out = vec![0.0; na];
    for t in tables {
        for (o, v) in out.iter_mut().zip(t.row(s)) {
            *o += v;
        }
    }
    let k = tables.len() as f64;
    out.iter_mut().for_each(|v| *v /= k);
    out
}

/// `max_ij ||Q_i - Q_j||_inf`, computed entrywise as max minus min.
pub fn spread(tables: &[QTable]) -> f64 {
    let n = tables[0].values.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = tables
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t.values[i]), hi.max(t.values[i])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn spread_is_pairwise_sup_distance() {
        let a = QTable::from_values(1, 2, vec![0.0, 1.0]).unwrap();
        let b = QTable::from_values(1, 2, vec![0.5, -1.0]).unwrap();
        let c = QTable::from_values(1, 2, vec![0.2, 0.0]).unwrap();
        let e = QEnsemble::new(vec![a.clone(), b.clone(), c]).unwrap();
        assert_eq!(e.spread(), a.sup_distance(&b));
        assert_eq!(e.mean_row(0), vec![0.7 / 3.0, 0.0]);
    }

    #[test]
    fn targets_follow_members_only_on_sync() {
        let mut e = QEnsemble::zeros(2, 2, 2).unwrap();
        e.members_mut()[1].set(1, 1, 4.0);
        assert_eq!(e.targets()[1].get(1, 1), 0.0);
        e.sync_targets();
        assert_eq!(e.targets()[1].get(1, 1), 4.0);
    }

    #[test]
    fn rejects_mismatched_members() {
        assert!(QEnsemble::new(vec![]).is_err());
        assert!(QEnsemble::new(vec![QTable::zeros(2, 2), QTable::zeros(2, 3)]).is_err());
        assert!(QTable::from_values(1, 2, vec![f64::NAN, 0.0]).is_err());
    }
}
