//! Run configuration files.
//!
//! Configs are TOML. `inf` is a legal float, so `kappa = inf` selects the
//! hardmax target. A config may list `[[variant]]` entries whose `set`
//! tables are merged over the base before parsing; each variant becomes its
//! own run directory.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::baselines::BaselineKind;
use crate::error::{Error, Result};
use crate::gridworld::{GridLayout, Gridworld, GridworldSpec, DEFAULT_MAP};
use crate::mdp::{random_mdp, RandomMdpSpec, StateId, TabularMdp};

/// Environment section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    Gridworld {
        /// Map text; wins over `map_file`. Both absent means the default map.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ascii_map: Option<String>,
        /// Relative paths resolve against the config file's directory.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_file: Option<PathBuf>,
        #[serde(default = "d_slip")]
        slip_prob: f64,
        #[serde(default = "d_one")]
        goal_reward: f64,
        #[serde(default)]
        step_reward: f64,
        #[serde(default = "d_discount")]
        discount: f64,
        #[serde(default)]
        reward_noise_std: f64,
    },
    RandomMdp(RandomMdpSpec),
}

fn d_slip() -> f64 {
    0.2
}
fn d_one() -> f64 {
    1.0
}
fn d_discount() -> f64 {
    0.95
}

impl Default for EnvConfig {
    fn default() -> Self {
        let spec = GridworldSpec::default();
        EnvConfig::Gridworld {
            ascii_map: None,
            map_file: None,
            slip_prob: spec.slip_prob,
            goal_reward: spec.goal_reward,
            step_reward: spec.step_reward,
            discount: spec.discount,
            reward_noise_std: spec.reward_noise_std,
        }
    }
}

/// A built environment.
#[derive(Debug, Clone)]
pub struct Environment {
    pub mdp: TabularMdp,
    pub layout: Option<GridLayout>,
    /// Map text for Gridworlds.
    pub map: Option<String>,
}

impl EnvConfig {
    /// Reads an environment from a file holding either a bare environment
    /// table or a run config with an `[environment]` section.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(e))?;
        let env = match table.remove("environment") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config("environment", "expected a table")),
            None => table,
        };
        let mut env = EnvConfig::deserialize(env).map_err(parse_error)?;
        env.resolve(path.parent().unwrap_or(Path::new(".")))?;
        Ok(env)
    }

    /// Reads `map_file` into `ascii_map`, resolving it against `base`.
    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        if let EnvConfig::Gridworld { ascii_map, map_file, .. } = self {
            if ascii_map.is_none() {
                if let Some(file) = map_file.take() {
                    let path = if file.is_absolute() { file } else { base.join(file) };
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    *ascii_map = Some(text);
                }
            }
        }
        Ok(())
    }

    pub fn gridworld_spec(&self) -> Option<Result<GridworldSpec>> {
        match self {
            EnvConfig::Gridworld { ascii_map, map_file, slip_prob, goal_reward, step_reward, discount, reward_noise_std } => {
                let map = match (ascii_map, map_file) {
                    (Some(m), _) => m.clone(),
                    (None, Some(f)) => match std::fs::read_to_string(f) {
                        Ok(t) => t,
                        Err(e) => return Some(Err(Error::io(f, e))),
                    },
                    (None, None) => DEFAULT_MAP.to_string(),
                };
                Some(Ok(GridworldSpec {
                    ascii_map: map,
                    slip_prob: *slip_prob,
                    goal_reward: *goal_reward,
                    step_reward: *step_reward,
                    discount: *discount,
                    reward_noise_std: *reward_noise_std,
                }))
            }
            EnvConfig::RandomMdp(_) => None,
        }
    }

    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvConfig::Gridworld { .. } => {
                let spec = self.gridworld_spec().expect("gridworld")?;
                let world = Gridworld::build(&spec).map_err(|e| match e {
                    Error::Map(m) => Error::config("environment.ascii_map", m),
                    Error::Usage(m) | Error::Mdp(m) => Error::config("environment", m),
                    other => other,
                })?;
                Ok(Environment { mdp: world.mdp, layout: Some(world.layout), map: Some(spec.ascii_map) })
            }
            EnvConfig::RandomMdp(spec) => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let mdp = random_mdp(spec, &mut rng).map_err(|e| Error::config("environment", e.to_string()))?;
                Ok(Environment { mdp, layout: None, map: None })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Uql,
    QLearning,
    DoubleQ,
    SqlFixedBeta,
    EnsembleMean,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Uql => "uql",
            Algorithm::QLearning => "q-learning",
            Algorithm::DoubleQ => "double-q",
            Algorithm::SqlFixedBeta => "sql-fixed-beta",
            Algorithm::EnsembleMean => "ensemble-mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Uniform `(s, a)` draws from the model.
    #[default]
    Uniform,
    /// Environment interaction with replay.
    Online,
}

/// Parameters for the fixed-temperature baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_end: Option<f64>,
    pub anneal_updates: u64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { beta: 1.0, beta_end: None, anneal_updates: 0 }
    }
}

/// Named override block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub set: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub name: String,
    pub algorithm: Algorithm,
    pub phase: Phase,
    /// Updates (uniform phase) or environment steps (online phase).
    pub num_updates: u64,
    pub seeds: Vec<u64>,
    /// Probe state ids.
    pub probe_states: Vec<StateId>,
    /// Probe cells `[row, col]`, Gridworld only; appended to `probe_states`.
    pub probe_cells: Vec<[usize; 2]>,
    pub record_interval: u64,
    /// Rollout horizon cap for the online phase.
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub environment: EnvConfig,
    pub agent: AgentConfig,
    pub baseline: BaselineParams,
    #[serde(rename = "variant", skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            algorithm: Algorithm::Uql,
            phase: Phase::Uniform,
            num_updates: 10_000,
            seeds: vec![0],
            probe_states: Vec::new(),
            probe_cells: Vec::new(),
            record_interval: 50,
            horizon: crate::metrics::DEFAULT_HORIZON,
            output_dir: None,
            environment: EnvConfig::default(),
            agent: AgentConfig::default(),
            baseline: BaselineParams::default(),
            variants: Vec::new(),
        }
    }
}

fn parse_error(e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    let field = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("unknown field") || message.contains("missing field"))
        .unwrap_or("config")
        .to_string();
    Error::config(field, e.to_string().trim())
}

impl RunConfig {
    /// Parses and validates config text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(parse_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; map files resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.environment.resolve(base)?;
        for v in &mut cfg.variants {
            resolve_variant_map(v, base)?;
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn to_value(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_value(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(parse_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn baseline_kind(&self) -> Option<BaselineKind> {
        match self.algorithm {
            Algorithm::Uql => None,
            Algorithm::QLearning => Some(BaselineKind::QLearning),
            Algorithm::DoubleQ => Some(BaselineKind::DoubleQ),
            Algorithm::EnsembleMean => Some(BaselineKind::EnsembleMean),
            Algorithm::SqlFixedBeta => Some(BaselineKind::SqlFixedBeta {
                beta: self.baseline.beta,
                beta_end: self.baseline.beta_end,
                anneal_updates: self.baseline.anneal_updates,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if self.record_interval == 0 {
            return Err(Error::config("record_interval", "must be at least 1"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name", "must be a nonempty plain file name"));
        }
        if let EnvConfig::RandomMdp(_) = self.environment {
            if !self.probe_cells.is_empty() {
                return Err(Error::config("probe_cells", "only valid for gridworld environments"));
            }
        }
        self.agent.validate()?;
        if let Some(kind) = self.baseline_kind() {
            kind.validate(self.agent.ensemble_size)?;
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
            return Err(Error::config("variant.name", "variant names must be unique plain file names"));
        }
        Ok(())
    }

    /// The probe state ids after translating `probe_cells`. With no probes
    /// configured the start states are probed.
    pub fn probe_ids(&self, env: &Environment) -> Result<Vec<StateId>> {
        let mut ids = self.probe_states.clone();
        for &[r, c] in &self.probe_cells {
            let layout = env.layout.as_ref().ok_or_else(|| Error::config("probe_cells", "needs a gridworld"))?;
            let s = layout
                .state(r, c)
                .ok_or_else(|| Error::config("probe_cells", format!("cell ({r}, {c}) is not a free cell")))?;
            ids.push(s);
        }
        for &s in &ids {
            if s >= env.mdp.num_states() {
                return Err(Error::config("probe_states", format!("state {s} out of range")));
            }
        }
        if ids.is_empty() {
            ids = env.mdp.start_states().to_vec();
        }
        Ok(ids)
    }

    /// One `(name, config)` per variant, or the config itself (with an
    /// empty name) when there are none.
    pub fn expand_variants(&self) -> Result<Vec<(String, RunConfig)>> {
        if self.variants.is_empty() {
            return Ok(vec![(String::new(), self.clone())]);
        }
        let mut base = self.clone();
        base.variants.clear();
        let base = base.to_value()?;
        self.variants
            .iter()
            .map(|v| {
                let mut table = base.clone();
                merge(&mut table, &v.set);
                let cfg = RunConfig::from_value(table).map_err(|e| match e {
                    Error::Config { field, message } => {
                        Error::config(format!("variant.{}.{field}", v.name), message)
                    }
                    other => other,
                })?;
                Ok((v.name.clone(), cfg))
            })
            .collect()
    }

    /// Sets the dotted `path` to `value` (TOML syntax; bare words are
    /// strings) and re-validates.
    pub fn with_override(&self, path: &str, value: &str) -> Result<RunConfig> {
        let mut table = self.to_value()?;
        set_path(&mut table, path, parse_scalar(value))?;
        RunConfig::from_value(table).map_err(|e| match e {
            Error::Config { message, .. } => Error::config(path, message),
            other => other,
        })
    }
}

fn resolve_variant_map(v: &mut Variant, base: &Path) -> Result<()> {
    let Some(toml::Value::Table(env)) = v.set.get_mut("environment") else {
        return Ok(());
    };
    if env.contains_key("ascii_map") {
        return Ok(());
    }
    if let Some(toml::Value::String(file)) = env.remove("map_file") {
        let path = base.join(&file);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        env.insert("ascii_map".into(), toml::Value::String(text));
    }
    Ok(())
}

/// Parses a CLI value: any TOML scalar or array, otherwise a string.
pub fn parse_scalar(text: &str) -> toml::Value {
    let text = text.trim();
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(path, "malformed parameter path"));
    }
    let last = keys.pop().expect("nonempty");
    let mut cur = table;
    for k in keys {
        let entry = cur.entry(k).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::config(path, format!("`{k}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn merge(dst: &mut toml::Table, src: &toml::Table) {
    for (k, v) in src {
        match (dst.get_mut(k), v) {
            (Some(toml::Value::Table(d)), toml::Value::Table(s)) => merge(d, s),
            _ => {
                dst.insert(k.clone(), v.clone());
            }
        }
    }
}
