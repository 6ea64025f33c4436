//! The ensemble update: per-next-state temperature solved on the target
//! tables, shared by all members, applied through each member's own
//! next-state values.

use rand::Rng;

use crate::agent::config::AgentConfig;
use crate::agent::replay::ReplayBuffer;
use crate::agent::Learner;
use crate::error::{Error, Result};
use crate::mdp::{StateId, TabularMdp, Transition};
use crate::qtable::{QEnsemble, QTable};
use crate::soft::{check_prior, reduce_unchecked, solve_unchecked, BetaSolution, PriorPolicy, Reduction};

/// TD target for one member.
///
/// Terminal transitions bootstrap nothing; otherwise the member's next-state
/// values are reduced at inverse temperature `kappa * beta`.
#[allow(clippy::too_many_arguments)]
pub fn uql_target(
    member_next_values: &[f64],
    prior: &[f64],
    reward: f64,
    is_terminal: bool,
    beta: f64,
    kappa: f64,
    gamma: f64,
    operator: Reduction,
) -> Result<f64> {
    if is_terminal {
        return Ok(reward);
    }
    Ok(reward + gamma * crate::soft::reduce_next_state(member_next_values, prior, beta, kappa, operator)?)
}

/// Ensemble of Q tables trained with solved-temperature soft targets.
#[derive(Debug, Clone)]
pub struct UqlAgent {
    ensemble: QEnsemble,
    prior: PriorPolicy,
    cfg: AgentConfig,
    gamma: f64,
    visits: Vec<Vec<u32>>,
    updates: u64,
}

impl UqlAgent {
    pub fn new(ensemble: QEnsemble, prior: PriorPolicy, cfg: AgentConfig, gamma: f64) -> Result<Self> {
        if prior.num_actions() != ensemble.num_actions() || prior.num_states() != ensemble.num_states() {
            return Err(Error::usage("prior shape does not match the ensemble"));
        }
        for s in 0..prior.num_states() {
            check_prior(prior.row(s))?;
        }
        let cells = ensemble.num_states() * ensemble.num_actions();
        Ok(Self {
            visits: vec![vec![0; cells]; ensemble.k()],
            ensemble,
            prior,
            cfg,
            gamma,
            updates: 0,
        })
    }

    /// `K = cfg.ensemble_size` members initialized from `cfg.init`, uniform prior.
    pub fn for_mdp<R: Rng + ?Sized>(mdp: &TabularMdp, cfg: AgentConfig, rng: &mut R) -> Result<Self> {
        let members = (0..cfg.ensemble_size)
            .map(|_| cfg.init.table(mdp.terminal_flags(), mdp.num_actions(), rng))
            .collect();
        let prior = PriorPolicy::uniform(mdp.num_states(), mdp.num_actions());
        Self::new(QEnsemble::new(members)?, prior, cfg, mdp.discount())
    }

    pub fn ensemble(&self) -> &QEnsemble {
        &self.ensemble
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn prior(&self) -> &PriorPolicy {
        &self.prior
    }

    /// Number of completed update calls (drives target syncing).
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn visits(&self) -> &[Vec<u32>] {
        &self.visits
    }

    pub(crate) fn restore(&mut self, ensemble: QEnsemble, visits: Vec<Vec<u32>>, updates: u64) -> Result<()> {
        if ensemble.k() != self.ensemble.k()
            || ensemble.num_states() != self.ensemble.num_states()
            || ensemble.num_actions() != self.ensemble.num_actions()
            || visits.len() != ensemble.k()
        {
            return Err(Error::Checkpoint("checkpoint shape does not match agent".into()));
        }
        self.ensemble = ensemble;
        self.visits = visits;
        self.updates = updates;
        Ok(())
    }

    fn needs_beta(&self) -> bool {
        self.cfg.solver.kappa != f64::INFINITY
            && matches!(self.cfg.solver.operator, Reduction::Mellowmax | Reduction::SoftmaxExpectation)
    }

    /// Solves the inverse temperature at `s` from the target tables.
    pub fn solve_beta_at(&self, s: StateId) -> BetaSolution {
        let rows: Vec<&[f64]> = self.ensemble.targets().iter().map(|t| t.row(s)).collect();
        solve_unchecked(&rows, self.prior.row(s), &self.cfg.solver)
    }

    /// Median solved beta over non-terminal states.
    pub fn median_beta(&self, mdp: &TabularMdp) -> f64 {
        let mut betas: Vec<f64> = mdp.non_terminal_states().iter().map(|&s| self.solve_beta_at(s).beta).collect();
        betas.sort_by(f64::total_cmp);
        let n = betas.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            betas[n / 2]
        } else {
            0.5 * (betas[n / 2 - 1] + betas[n / 2])
        }
    }

    // One beta per distinct non-terminal next state.
    fn betas_for<'a>(&self, transitions: impl Iterator<Item = &'a Transition>) -> Vec<(StateId, f64)> {
        let mut cache: Vec<(StateId, f64)> = Vec::new();
        if !self.needs_beta() {
            return cache;
        }
        for t in transitions {
            if !t.is_terminal && !cache.iter().any(|(s, _)| *s == t.next_state) {
                cache.push((t.next_state, self.solve_beta_at(t.next_state).beta));
            }
        }
        cache
    }

    fn apply(&mut self, k: usize, t: &Transition, betas: &[(StateId, f64)]) {
        let solver = &self.cfg.solver;
        let member = &self.ensemble.members()[k];
        let y = if t.is_terminal {
            t.reward
        } else {
            let beta = betas.iter().find(|(s, _)| *s == t.next_state).map_or(f64::INFINITY, |(_, b)| *b);
            let next = reduce_unchecked(
                member.row(t.next_state),
                self.prior.row(t.next_state),
                beta,
                solver.kappa,
                solver.operator,
            );
            t.reward + self.gamma * next
        };
        let idx = t.state * member.num_actions() + t.action;
        let alpha = self.cfg.learning_rate.rate(self.visits[k][idx]);
        self.visits[k][idx] += 1;
        let q = &mut self.ensemble.members_mut()[k].values_mut()[idx];
        *q += alpha * (y - *q);
    }

    fn tick(&mut self) {
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.target_sync_interval) {
            self.ensemble.sync_targets();
        }
    }

    /// Applies `batch` to every member, then counts one update.
    pub fn update_batch(&mut self, batch: &[Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::usage("update batch is empty"));
        }
        let betas = self.betas_for(batch.iter());
        for t in batch {
            for k in 0..self.ensemble.k() {
                self.apply(k, t, &betas);
            }
        }
        self.tick();
        Ok(())
    }

    /// Member `k` learns from `batches[k]`; betas come from the same target
    /// snapshot for every member.
    pub fn update_members_independent(&mut self, batches: &[Vec<Transition>]) -> Result<()> {
        if batches.len() != self.ensemble.k() || batches.iter().any(Vec::is_empty) {
            return Err(Error::usage("need one nonempty batch per member"));
        }
        let betas = self.betas_for(batches.iter().flatten());
        for (k, batch) in batches.iter().enumerate() {
            for t in batch {
                self.apply(k, t, &betas);
            }
        }
        self.tick();
        Ok(())
    }
}

impl Learner for UqlAgent {
    fn name(&self) -> &'static str {
        "uql"
    }

    fn learn<R: Rng + ?Sized>(&mut self, t: &Transition, _rng: &mut R) -> Result<()> {
        self.update_batch(std::slice::from_ref(t))
    }

    fn learn_from_replay<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        shared: bool,
        rng: &mut R,
    ) -> Result<()> {
        if shared {
            let batch = buffer.sample(batch_size, rng)?;
            self.update_batch(&batch)
        } else {
            let batches = (0..self.ensemble.k())
                .map(|_| buffer.sample(batch_size, rng))
                .collect::<Result<Vec<_>>>()?;
            self.update_members_independent(&batches)
        }
    }

    fn tables(&self) -> &[QTable] {
        self.ensemble.members()
    }

    fn median_beta(&self, mdp: &TabularMdp) -> Option<f64> {
        Some(self.median_beta(mdp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::config::LearningRate;
    use crate::oracle::value_iteration;
    use crate::soft::BetaSolverConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const U2: [f64; 2] = [0.5, 0.5];

    #[test]
    fn target_examples() {
        assert_eq!(uql_target(&[9.0, 9.0], &U2, 3.0, true, 1.0, 1.0, 0.9, Reduction::Mellowmax).unwrap(), 3.0);
        let hard = uql_target(&[2.0, 5.0], &U2, 1.0, false, 0.01, f64::INFINITY, 0.9, Reduction::Mellowmax).unwrap();
        assert_eq!(hard, 1.0 + 0.9 * 5.0);
        let soft = uql_target(&[0.0, 1.0], &U2, 1.0, false, 1.0, 1.0, 0.99, Reduction::Mellowmax).unwrap();
        let oracle = 1.0 + 0.99 * ((1.0 + std::f64::consts::E) / 2.0).ln();
        assert!((soft - oracle).abs() < 1e-14);
        assert!((soft - 1.6139).abs() < 1e-4);
    }

    /// s -> T with reward 1 under both actions.
    fn one_step() -> TabularMdp {
        let p = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        TabularMdp::new(2, 2, p, vec![1.0, 1.0, 0.0, 0.0], 0.9, vec![false, true]).unwrap()
    }

    fn agent(k: usize, alpha: f64) -> UqlAgent {
        let cfg = AgentConfig {
            ensemble_size: k,
            learning_rate: LearningRate::Constant { alpha },
            ..Default::default()
        };
        UqlAgent::new(QEnsemble::zeros(k, 2, 2).unwrap(), PriorPolicy::uniform(2, 2), cfg, 0.9).unwrap()
    }

    #[test]
    fn unit_step_terminal_update_copies_reward() {
        let mut a = agent(1, 1.0);
        let t = Transition { state: 0, action: 1, reward: 2.5, next_state: 1, is_terminal: true };
        a.update_batch(&[t]).unwrap();
        assert_eq!(a.ensemble().members()[0].get(0, 1), 2.5);
    }

    #[test]
    fn zero_step_size_leaves_ensemble_unchanged() {
        let mut a = agent(3, 0.0);
        let before = a.ensemble().clone();
        let t = Transition { state: 0, action: 0, reward: 1.0, next_state: 0, is_terminal: false };
        a.update_batch(&[t, t]).unwrap();
        assert_eq!(a.ensemble().members(), before.members());
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(matches!(agent(2, 0.5).update_batch(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn chain_converges_to_value_iteration() {
        let mdp = one_step();
        let truth = value_iteration(&mdp, 1e-12);
        let cfg = AgentConfig { ensemble_size: 5, learning_rate: LearningRate::Constant { alpha: 0.5 }, ..Default::default() };
        let mut a = UqlAgent::for_mdp(&mdp, cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..200 {
            let t = crate::mdp::sample_step(&mdp, 0, i % 2, &mut rng).unwrap();
            a.update_batch(&[t]).unwrap();
        }
        for m in a.ensemble().members() {
            assert!(m.sup_distance(&truth.q_star) <= 1e-6);
        }
        assert_eq!(truth.v_star[0], 1.0);
    }

    #[test]
    fn targets_sync_on_interval() {
        let mut a = agent(2, 1.0);
        a.cfg.target_sync_interval = 3;
        let t = Transition { state: 0, action: 0, reward: 1.0, next_state: 1, is_terminal: true };
        a.update_batch(&[t]).unwrap();
        a.update_batch(&[t]).unwrap();
        assert_eq!(a.ensemble().targets()[0].get(0, 0), 0.0);
        a.update_batch(&[t]).unwrap();
        assert_eq!(a.ensemble().targets()[0].get(0, 0), 1.0);
    }

    #[test]
    fn beta_is_shared_and_solved_on_targets() {
        let members = vec![
            QTable::from_values(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap(),
            QTable::from_values(2, 2, vec![0.0, 0.0, 0.0, 1.2]).unwrap(),
        ];
        let cfg = AgentConfig { ensemble_size: 2, learning_rate: LearningRate::Constant { alpha: 1.0 }, ..Default::default() };
        let mut a = UqlAgent::new(QEnsemble::new(members).unwrap(), PriorPolicy::uniform(2, 2), cfg, 0.9).unwrap();
        let beta = crate::soft::solve_beta(&[[1.0, 0.0], [0.0, 1.2]], &U2, &BetaSolverConfig::default()).unwrap();
        assert_eq!(a.solve_beta_at(1).beta, beta);
        let t = Transition { state: 0, action: 0, reward: 0.0, next_state: 1, is_terminal: false };
        a.update_batch(&[t]).unwrap();
        let expect0 = 0.9 * crate::soft::mellowmax(&[1.0, 0.0], &U2, 1.0 / beta).unwrap();
        let expect1 = 0.9 * crate::soft::mellowmax(&[0.0, 1.2], &U2, 1.0 / beta).unwrap();
        assert!((a.ensemble().members()[0].get(0, 0) - expect0).abs() < 1e-15);
        assert!((a.ensemble().members()[1].get(0, 0) - expect1).abs() < 1e-15);
    }
}
