//! Runs configs and sweeps, writing result directories.
//!
//! A run directory holds `config.toml` (the resolved config), one
//! `seed_<n>.csv` per seed, `aggregate.csv`, `final_q.csv` with the final
//! mean table of every seed, `truth.csv` with `V*`, `manifest.toml`, and
//! `map.txt` for Gridworlds. Configs with variants get one such directory
//! per variant below the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agent::{run_online_phase, run_uniform_update_phase, Learner, OnlineOptions, ReplayBuffer, UqlAgent};
use crate::baselines::BaselineLearner;
use crate::error::{Error, Result};
use crate::experiment::config::{EnvConfig, Environment, Phase, RunConfig};
use crate::experiment::results::{aggregate, aggregate_csv, rows_from_records, seed_csv, AggregateRow};
use crate::experiment::seeds::{derive_seed, seed_rng};
use crate::mdp::{StateId, TabularMdp, Transition};
use crate::metrics::{Recorder, RunRecord};
use crate::oracle::{value_iteration, GroundTruth};
use crate::qtable::QTable;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "UQL_OUTPUT_ROOT";

/// Tolerance for the value-iteration ground truth.
pub const TRUTH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides the config's `output_dir`.
    pub output_dir: Option<PathBuf>,
    /// Added to every seed before derivation.
    pub seed_offset: u64,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
}

/// `$UQL_OUTPUT_ROOT`, or `results` when unset.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"))
}

/// CLI flag, then the config's `output_dir` (relative paths sit below the
/// output root), then `<root>/<name>`.
pub fn resolve_output_dir(cfg: &RunConfig, opts: &RunOptions) -> PathBuf {
    if let Some(dir) = &opts.output_dir {
        return dir.clone();
    }
    match &cfg.output_dir {
        Some(dir) if dir.is_absolute() => dir.clone(),
        Some(dir) => output_root().join(dir),
        None => output_root().join(&cfg.name),
    }
}

/// The UQL agent or any baseline, behind one type.
#[derive(Debug, Clone)]
pub enum AnyLearner {
    Uql(UqlAgent),
    Baseline(BaselineLearner),
}

impl AnyLearner {
    /// Builds the learner for `cfg.algorithm`, drawing initial tables from `rng`.
    pub fn for_config<R: Rng + ?Sized>(cfg: &RunConfig, mdp: &TabularMdp, rng: &mut R) -> Result<Self> {
        match cfg.baseline_kind() {
            None => Ok(AnyLearner::Uql(UqlAgent::for_mdp(mdp, cfg.agent.clone(), rng)?)),
            Some(kind) => Ok(AnyLearner::Baseline(BaselineLearner::for_mdp(kind, mdp, cfg.agent.clone(), rng)?)),
        }
    }
}

impl Learner for AnyLearner {
    fn name(&self) -> &'static str {
        match self {
            AnyLearner::Uql(l) => l.name(),
            AnyLearner::Baseline(l) => l.name(),
        }
    }

    fn learn<R: Rng + ?Sized>(&mut self, t: &Transition, rng: &mut R) -> Result<()> {
        match self {
            AnyLearner::Uql(l) => l.learn(t, rng),
            AnyLearner::Baseline(l) => l.learn(t, rng),
        }
    }

    fn learn_from_replay<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        shared: bool,
        rng: &mut R,
    ) -> Result<()> {
        match self {
            AnyLearner::Uql(l) => l.learn_from_replay(buffer, batch_size, shared, rng),
            AnyLearner::Baseline(l) => l.learn_from_replay(buffer, batch_size, shared, rng),
        }
    }

    fn tables(&self) -> &[QTable] {
        match self {
            AnyLearner::Uql(l) => l.tables(),
            AnyLearner::Baseline(l) => l.tables(),
        }
    }

    fn median_beta(&self, mdp: &TabularMdp) -> Option<f64> {
        match self {
            AnyLearner::Uql(l) => Learner::median_beta(l, mdp),
            AnyLearner::Baseline(l) => l.median_beta(mdp),
        }
    }
}

/// Output of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub records: Vec<RunRecord>,
    pub estimate: QTable,
}

/// Trains one seed. The stream is consumed by table initialization and
/// then by the phase loop, nothing else.
pub fn run_seed(
    cfg: &RunConfig,
    mdp: &TabularMdp,
    truth: &GroundTruth,
    probes: &[StateId],
    seed: u64,
    seed_offset: u64,
) -> Result<SeedRun> {
    let mut rng = seed_rng(seed, seed_offset);
    let mut learner = AnyLearner::for_config(cfg, mdp, &mut rng)?;
    let recorder = Recorder::new(mdp, truth, probes.to_vec(), cfg.record_interval)?;
    let records = match cfg.phase {
        Phase::Uniform => run_uniform_update_phase(mdp, &mut learner, cfg.num_updates, Some(&recorder), &mut rng)?,
        Phase::Online => {
            let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity)?;
            let opts = OnlineOptions {
                num_steps: cfg.num_updates,
                exploration: cfg.agent.exploration,
                batch_size: cfg.agent.batch_size,
                shared_minibatch: cfg.agent.shared_minibatch,
                learning_starts: cfg.agent.learning_starts,
                horizon: cfg.horizon,
            };
            run_online_phase(mdp, &mut learner, &mut buffer, &opts, Some(&recorder), &mut rng)?.0
        }
    };
    Ok(SeedRun { records, estimate: learner.estimate() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedStatus {
    pub seed: u64,
    pub derived_seed: u64,
    /// `ok` or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    variant: &'a str,
    algorithm: &'a str,
    seed_derivation: &'a str,
    seed_offset: u64,
    probe_states: &'a [StateId],
    probe_v_star: Vec<f64>,
    seeds: &'a [SeedStatus],
}

/// What one run directory ended up holding.
#[derive(Debug, Clone)]
pub struct VariantSummary {
    pub name: String,
    pub dir: PathBuf,
    pub seeds: Vec<SeedStatus>,
    pub aggregate: Vec<AggregateRow>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub root: PathBuf,
    pub variants: Vec<VariantSummary>,
}

impl RunSummary {
    pub fn failed_seeds(&self) -> usize {
        self.variants.iter().flat_map(|v| &v.seeds).filter(|s| s.status != "ok").count()
    }

    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.name == name)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

struct Prepared {
    name: String,
    cfg: RunConfig,
    env: Environment,
    truth: GroundTruth,
    probes: Vec<StateId>,
    dir: PathBuf,
}

/// Runs every variant and seed of `cfg` and writes the result directories.
///
/// Invalid configs fail before anything is written. A seed that fails at
/// run time is marked `failed` in the manifest; the others still complete.
pub fn run_experiment(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let root = resolve_output_dir(cfg, opts);
    let prepared = cfg
        .expand_variants()?
        .into_iter()
        .map(|(name, vcfg)| {
            let env = vcfg.environment.build()?;
            let probes = vcfg.probe_ids(&env)?;
            let truth = value_iteration(&env.mdp, TRUTH_TOL);
            let dir = if name.is_empty() { root.clone() } else { root.join(&name) };
            Ok(Prepared { name, cfg: vcfg, env, truth, probes, dir })
        })
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, u64)> =
        prepared.iter().enumerate().flat_map(|(i, p)| p.cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let work = || -> Vec<Result<SeedRun>> {
        tasks
            .par_iter()
            .map(|&(i, seed)| {
                let p = &prepared[i];
                run_seed(&p.cfg, &p.env.mdp, &p.truth, &p.probes, seed, opts.seed_offset)
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::usage(format!("cannot start worker pool: {e}")))?;
    let mut outcomes = pool.install(work).into_iter();

    let mut variants = Vec::with_capacity(prepared.len());
    for p in &prepared {
        create_dir(&p.dir)?;
        let mut statuses = Vec::new();
        let mut all_rows = Vec::new();
        let mut finals = String::from("seed,state,action,value\n");
        for &seed in &p.cfg.seeds {
            let derived_seed = derive_seed(seed, opts.seed_offset);
            match outcomes.next().expect("one outcome per task") {
                Ok(run) => {
                    let rows = rows_from_records(seed, &run.records);
                    let file = format!("seed_{seed}.csv");
                    write(&p.dir.join(&file), &seed_csv(&rows))?;
                    for s in 0..run.estimate.num_states() {
                        for (a, v) in run.estimate.row(s).iter().enumerate() {
                            let _ = writeln!(finals, "{seed},{s},{a},{v}");
                        }
                    }
                    all_rows.extend(rows);
                    statuses.push(SeedStatus { seed, derived_seed, status: "ok".into(), file: Some(file), error: None });
                }
                Err(e) => statuses.push(SeedStatus {
                    seed,
                    derived_seed,
                    status: "failed".into(),
                    file: None,
                    error: Some(e.to_string()),
                }),
            }
        }
        let agg = aggregate(&all_rows);
        write(&p.dir.join("aggregate.csv"), &aggregate_csv(&agg))?;
        write(&p.dir.join("final_q.csv"), &finals)?;
        write(&p.dir.join("truth.csv"), &truth_csv(&p.truth))?;
        write(&p.dir.join("config.toml"), &p.cfg.to_toml_string()?)?;
        if let Some(map) = &p.env.map {
            write(&p.dir.join("map.txt"), map)?;
        }
        let manifest = Manifest {
            name: &p.cfg.name,
            variant: &p.name,
            algorithm: p.cfg.algorithm.name(),
            seed_derivation: "chacha8(splitmix64(seed + seed_offset))",
            seed_offset: opts.seed_offset,
            probe_states: &p.probes,
            probe_v_star: p.probes.iter().map(|&s| p.truth.v_star[s]).collect(),
            seeds: &statuses,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::config("manifest", e.to_string()))?;
        write(&p.dir.join("manifest.toml"), &text)?;
        variants.push(VariantSummary { name: p.name.clone(), dir: p.dir.clone(), seeds: statuses, aggregate: agg });
    }
    Ok(RunSummary { root, variants })
}

/// `state,v_star,optimal_actions` with actions joined by `|`.
pub fn truth_csv(truth: &GroundTruth) -> String {
    let mut out = String::from("state,v_star,optimal_actions\n");
    for (s, v) in truth.v_star.iter().enumerate() {
        let acts: Vec<String> = truth.pi_star[s].iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{s},{v},{}", acts.join("|"));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub root: PathBuf,
    pub points: Vec<(String, RunSummary)>,
}

/// Runs `cfg` once per value of the dotted parameter `param`. Each point
/// writes to `<output>/<param>=<value>`; `comparison.csv` at the top
/// concatenates all aggregates with `value,variant` prefixed.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[String], opts: &RunOptions) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::usage("sweep needs at least one value"));
    }
    let configs =
        values.iter().map(|v| Ok((v.trim().to_string(), cfg.with_override(param, v)?))).collect::<Result<Vec<_>>>()?;
    let root = resolve_output_dir(cfg, opts);
    create_dir(&root)?;
    let mut comparison = String::from("value,variant,step,metric,mean,std,count\n");
    let mut points = Vec::new();
    for (value, pcfg) in configs {
        let dir = root.join(format!("{param}={}", value.replace(['/', '\\'], "_")));
        let popts = RunOptions { output_dir: Some(dir), ..opts.clone() };
        let summary = run_experiment(&pcfg, &popts)?;
        for v in &summary.variants {
            for r in &v.aggregate {
                let _ = writeln!(comparison, "{value},{},{},{},{},{},{}", v.name, r.step, r.metric, r.mean, r.std, r.count);
            }
        }
        points.push((value, summary));
    }
    write(&root.join("comparison.csv"), &comparison)?;
    Ok(SweepSummary { root, points })
}

/// Ground-truth dump of one environment.
#[derive(Debug, Clone)]
pub struct OracleDump {
    pub dir: PathBuf,
    pub truth: GroundTruth,
}

/// Solves `env` by value iteration and writes `q_star.csv`
/// (`state,action,value`), `truth.csv` with `V*` and the optimal action
/// sets, plus `final_q.csv` and `map.txt` so map plots can render `Q*`.
pub fn dump_oracle(env: &EnvConfig, dir: &Path) -> Result<OracleDump> {
    let built = env.build()?;
    let truth = value_iteration(&built.mdp, TRUTH_TOL);
    create_dir(dir)?;
    let mut q = String::from("state,action,value\n");
    let mut finals = String::from("seed,state,action,value\n");
    for s in 0..truth.q_star.num_states() {
        for (a, v) in truth.q_star.row(s).iter().enumerate() {
            let _ = writeln!(q, "{s},{a},{v}");
            let _ = writeln!(finals, "0,{s},{a},{v}");
        }
    }
    write(&dir.join("q_star.csv"), &q)?;
    write(&dir.join("final_q.csv"), &finals)?;
    write(&dir.join("truth.csv"), &truth_csv(&truth))?;
    if let Some(map) = &built.map {
        write(&dir.join("map.txt"), map)?;
    }
    Ok(OracleDump { dir: dir.to_path_buf(), truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::results::read_seed_csv;

    fn small(extra: &str) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            "num_updates = 200\nseeds = [0, 1]\nrecord_interval = 50\n[agent]\nensemble_size = 2\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn zero_updates_writes_empty_results() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small("");
        cfg.num_updates = 0;
        let opts = RunOptions { output_dir: Some(dir.path().to_path_buf()), ..Default::default() };
        let summary = run_experiment(&cfg, &opts).unwrap();
        assert_eq!(summary.failed_seeds(), 0);
        assert!(read_seed_csv(&dir.path().join("seed_0.csv")).unwrap().is_empty());
        assert!(summary.variants[0].aggregate.is_empty());
    }

    #[test]
    fn reruns_are_byte_identical_across_job_counts() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small("");
        run_experiment(&cfg, &RunOptions { output_dir: Some(a.path().into()), jobs: 1, ..Default::default() }).unwrap();
        run_experiment(&cfg, &RunOptions { output_dir: Some(b.path().into()), jobs: 3, ..Default::default() }).unwrap();
        for f in ["seed_0.csv", "seed_1.csv", "aggregate.csv", "final_q.csv", "manifest.toml", "config.toml"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn seed_offset_changes_streams() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small("[agent.init]\nkind = \"uniform\"\nlow = 0.0\nhigh = 1.0\n");
        run_experiment(&cfg, &RunOptions { output_dir: Some(a.path().into()), ..Default::default() }).unwrap();
        run_experiment(&cfg, &RunOptions { output_dir: Some(b.path().into()), seed_offset: 1, ..Default::default() })
            .unwrap();
        assert_ne!(std::fs::read(a.path().join("seed_0.csv")).unwrap(), std::fs::read(b.path().join("seed_0.csv")).unwrap());
    }

    #[test]
    fn numeric_fault_fails_only_that_seed() {
        let dir = tempfile::tempdir().unwrap();
        // Huge rewards push one member table to infinity on every seed; the
        // metric check then marks the run failed without touching siblings.
        let cfg = RunConfig::from_toml_str(
            "num_updates = 100\nseeds = [0]\nrecord_interval = 10\n\
             [environment]\nkind = \"gridworld\"\ngoal_reward = 1e308\n\
             [agent]\nensemble_size = 2\n[agent.init]\nkind = \"constant\"\nvalue = 1e308\n\
             [[variant]]\nname = \"ok\"\nset = { environment = { goal_reward = 1.0 }, agent = { init = { kind = \"constant\", value = 0.0 } } }\n\
             [[variant]]\nname = \"bad\"\n",
        )
        .unwrap();
        let summary =
            run_experiment(&cfg, &RunOptions { output_dir: Some(dir.path().into()), ..Default::default() }).unwrap();
        assert_eq!(summary.variant("ok").unwrap().seeds[0].status, "ok");
        let bad = &summary.variant("bad").unwrap().seeds[0];
        assert_eq!(bad.status, "failed", "{bad:?}");
        let manifest = std::fs::read_to_string(dir.path().join("bad/manifest.toml")).unwrap();
        assert!(manifest.contains("failed"));
    }

    #[test]
    fn single_value_sweep_matches_plain_run() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small("");
        run_experiment(&cfg, &RunOptions { output_dir: Some(a.path().into()), ..Default::default() }).unwrap();
        let s = sweep(&cfg, "agent.solver.kappa", &["1.0".into()], &RunOptions { output_dir: Some(b.path().into()), ..Default::default() })
            .unwrap();
        let point = &s.points[0].1.root;
        for f in ["seed_0.csv", "aggregate.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(point.join(f)).unwrap());
        }
        assert!(b.path().join("comparison.csv").exists());
        let err = sweep(&cfg, "agent.nonsense", &["1".into()], &RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
