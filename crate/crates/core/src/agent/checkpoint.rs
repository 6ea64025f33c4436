//! Text checkpoints of a [`UqlAgent`] plus its random stream.
//!
//! Floats are written as the hex of their bit patterns so a restore is
//! bit-exact. Layout, one record per line:
//!
//! ```text
//! uql-checkpoint 1
//! step <u64>
//! updates <u64>
//! rng <seed hex> <stream> <word_pos>
//! shape <k> <states> <actions>
//! member <k> <hex> <hex> ...
//! target <k> <hex> <hex> ...
//! visits <k> <u32> <u32> ...
//! ```

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::agent::uql::UqlAgent;
use crate::error::{Error, Result};
use crate::qtable::{QEnsemble, QTable};

const MAGIC: &str = "uql-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub updates: u64,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub members: Vec<QTable>,
    pub targets: Vec<QTable>,
    pub visits: Vec<Vec<u32>>,
}

impl Checkpoint {
    pub fn capture(agent: &UqlAgent, step: u64, rng: &ChaCha8Rng) -> Self {
        Self {
            step,
            updates: agent.updates(),
            rng_seed: rng.get_seed(),
            rng_stream: rng.get_stream(),
            rng_word_pos: rng.get_word_pos(),
            members: agent.ensemble().members().to_vec(),
            targets: agent.ensemble().targets().to_vec(),
            visits: agent.visits().to_vec(),
        }
    }

    /// Loads tables and counters into `agent` and returns the saved stream.
    pub fn restore(&self, agent: &mut UqlAgent) -> Result<ChaCha8Rng> {
        let ensemble = QEnsemble::from_parts(self.members.clone(), self.targets.clone())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        agent.restore(ensemble, self.visits.clone(), self.updates)?;
        Ok(self.rng())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.rng_seed);
        rng.set_stream(self.rng_stream);
        rng.set_word_pos(self.rng_word_pos);
        rng
    }

    pub fn to_text(&self) -> String {
        let (ns, na) = (self.members[0].num_states(), self.members[0].num_actions());
        let seed: String = self.rng_seed.iter().map(|b| format!("{b:02x}")).collect();
        let mut out = format!(
            "{MAGIC}\nstep {}\nupdates {}\nrng {seed} {} {}\nshape {} {ns} {na}\n",
            self.step,
            self.updates,
            self.rng_stream,
            self.rng_word_pos,
            self.members.len()
        );
        let hex_row = |tag: &str, k: usize, t: &QTable| {
            let cells: Vec<String> = t.values().iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            format!("{tag} {k} {}\n", cells.join(" "))
        };
        for (k, t) in self.members.iter().enumerate() {
            out.push_str(&hex_row("member", k, t));
        }
        for (k, t) in self.targets.iter().enumerate() {
            out.push_str(&hex_row("target", k, t));
        }
        for (k, v) in self.visits.iter().enumerate() {
            let cells: Vec<String> = v.iter().map(u32::to_string).collect();
            out.push_str(&format!("visits {k} {}\n", cells.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing checkpoint header"));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{name}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected `{name}` line, got `{line}`")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let int = |s: &str| s.parse::<u128>().map_err(|_| bad(&format!("bad integer `{s}`")));

        let step = int(&one(field("step")?)?)? as u64;
        let updates = int(&one(field("updates")?)?)? as u64;
        let rng = field("rng")?;
        if rng.len() != 3 || rng[0].len() != 64 {
            return Err(bad("malformed rng line"));
        }
        let mut rng_seed = [0u8; 32];
        for (i, b) in rng_seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&rng[0][2 * i..2 * i + 2], 16).map_err(|_| bad("bad rng seed"))?;
        }
        let rng_stream = int(&rng[1])? as u64;
        let rng_word_pos = int(&rng[2])?;
        let shape = field("shape")?;
        if shape.len() != 3 {
            return Err(bad("malformed shape line"));
        }
        let (k, ns, na) = (int(&shape[0])? as usize, int(&shape[1])? as usize, int(&shape[2])? as usize);

        let mut tables = |tag: &str| -> Result<Vec<QTable>> {
            (0..k)
                .map(|i| {
                    let cells = field(tag)?;
                    if cells.first().map(String::as_str) != Some(i.to_string().as_str()) {
                        return Err(bad(&format!("{tag} rows out of order")));
                    }
                    let values = cells[1..]
                        .iter()
                        .map(|c| u64::from_str_radix(c, 16).map(f64::from_bits).map_err(|_| bad("bad table cell")))
                        .collect::<Result<Vec<f64>>>()?;
                    QTable::from_values(ns, na, values).map_err(|e| Error::Checkpoint(e.to_string()))
                })
                .collect()
        };
        let members = tables("member")?;
        let targets = tables("target")?;
        let visits = (0..k)
            .map(|_| {
                let cells = field("visits")?;
                let v = cells[1..]
                    .iter()
                    .map(|c| c.parse::<u32>().map_err(|_| bad("bad visit count")))
                    .collect::<Result<Vec<u32>>>()?;
                if v.len() != ns * na {
                    return Err(bad("visit row has wrong length"));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { step, updates, rng_seed, rng_stream, rng_word_pos, members, targets, visits })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn one(mut v: Vec<String>) -> Result<String> {
    if v.len() != 1 {
        return Err(Error::Checkpoint("expected a single value".into()));
    }
    Ok(v.remove(0))
}
