//! Slippery 8-direction Gridworld built from ASCII maps.
//!
//! Map characters: `#` wall, `.` free, `G` absorbing goal (exactly one),
//! `S` free start cell (optional, may repeat). Every non-wall cell is a
//! state, numbered in row-major order; the goal cell is the terminal state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};

/// Compass moves as `(d_row, d_col)`, in action-id order.
pub const MOVES: [(isize, isize); 8] = [
    (-1, 0),  // N
    (-1, 1),  // NE
    (0, 1),   // E
    (1, 1),   // SE
    (1, 0),   // S
    (1, -1),  // SW
    (0, -1),  // W
    (-1, -1), // NW
];

pub const ACTION_NAMES: [&str; 8] = ["N", "NE", "E", "SE", "S", "SW", "W", "NW"];

pub const NORTH: ActionId = 0;
pub const EAST: ActionId = 2;

/// 8x8 map: two wall bars force a switchback from the start corner to the
/// goal in the opposite corner.
pub const DEFAULT_MAP: &str = "\
S.......
........
######..
........
..######
........
........
.......G";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldSpec {
    pub ascii_map: String,
    #[serde(default = "default_slip")]
    pub slip_prob: f64,
    #[serde(default = "default_goal_reward")]
    pub goal_reward: f64,
    #[serde(default)]
    pub step_reward: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub reward_noise_std: f64,
}

fn default_slip() -> f64 {
    0.2
}
fn default_goal_reward() -> f64 {
    1.0
}
fn default_discount() -> f64 {
    0.95
}

impl Default for GridworldSpec {
    fn default() -> Self {
        Self::with_map(DEFAULT_MAP)
    }
}

impl GridworldSpec {
    /// Default dynamics on a caller-supplied map.
    pub fn with_map(map: &str) -> Self {
        Self {
            ascii_map: map.to_string(),
            slip_prob: default_slip(),
            goal_reward: default_goal_reward(),
            step_reward: 0.0,
            discount: default_discount(),
            reward_noise_std: 0.0,
        }
    }

    pub fn from_map_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(Self::with_map(&text))
    }
}

/// Cell geometry of a built Gridworld.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` of each state.
    pub cells: Vec<(usize, usize)>,
    /// State id at each cell in row-major order, `None` for walls.
    pub state_at: Vec<Option<StateId>>,
    pub goal: StateId,
}

impl GridLayout {
    pub fn state(&self, row: usize, col: usize) -> Option<StateId> {
        if row < self.rows && col < self.cols {
            self.state_at[row * self.cols + col]
        } else {
            None
        }
    }

    fn offset(&self, (r, c): (usize, usize), (dr, dc): (isize, isize)) -> Option<StateId> {
        let r = r.checked_add_signed(dr)?;
        let c = c.checked_add_signed(dc)?;
        self.state(r, c)
    }
}

/// A Gridworld MDP together with its layout.
#[derive(Debug, Clone)]
pub struct Gridworld {
    pub mdp: TabularMdp,
    pub layout: GridLayout,
}

fn parse_map(map: &str) -> Result<(GridLayout, Vec<StateId>)> {
    let lines: Vec<&str> = map.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.is_empty() {
        return Err(Error::Map("map is empty".into()));
    }
    let cols = lines[0].chars().count();
    if let Some((i, l)) = lines.iter().enumerate().find(|(_, l)| l.chars().count() != cols) {
        return Err(Error::Map(format!(
            "map is not rectangular: row {i} has {} columns, row 0 has {cols}",
            l.chars().count()
        )));
    }
    let rows = lines.len();
    let mut state_at = vec![None; rows * cols];
    let mut cells = Vec::new();
    let mut goals = Vec::new();
    let mut starts = Vec::new();
    for (r, line) in lines.iter().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '#' => continue,
                '.' | 'G' | 'S' => {}
                other => return Err(Error::Map(format!("unknown map character {other:?} at ({r}, {c})"))),
            }
            let id = cells.len();
            cells.push((r, c));
            state_at[r * cols + c] = Some(id);
            match ch {
                'G' => goals.push(id),
                'S' => starts.push(id),
                _ => {}
            }
        }
    }
    let goal = match goals.as_slice() {
        [g] => *g,
        [] => return Err(Error::Map("map has no goal cell 'G'".into())),
        many => return Err(Error::Map(format!("map has {} goal cells, expected exactly one", many.len()))),
    };
    Ok((GridLayout { rows, cols, cells, state_at, goal }, starts))
}

impl Gridworld {
    pub fn build(spec: &GridworldSpec) -> Result<Self> {
        if !(0.0..1.0).contains(&spec.slip_prob) {
            return Err(Error::Map(format!("slip_prob {} must lie in [0, 1)", spec.slip_prob)));
        }
        if !spec.goal_reward.is_finite() || !spec.step_reward.is_finite() {
            return Err(Error::Map("rewards must be finite".into()));
        }
        let (layout, starts) = parse_map(&spec.ascii_map)?;
        let ns = layout.cells.len();
        let na = MOVES.len();
        let mut transition = vec![0.0; ns * na * ns];
        let mut reward = vec![0.0; ns * na];
        let mut terminal = vec![false; ns];
        terminal[layout.goal] = true;

        for s in 0..ns {
            for (a, &mv) in MOVES.iter().enumerate() {
                let row = &mut transition[(s * na + a) * ns..][..ns];
                if s == layout.goal {
                    row[s] = 1.0;
                    continue;
                }
                let cell = layout.cells[s];
                let dest = layout.offset(cell, mv).unwrap_or(s);
                row[dest] += 1.0 - spec.slip_prob;
                if spec.slip_prob > 0.0 {
                    let dest_cell = layout.cells[dest];
                    let neighbors: Vec<StateId> = MOVES.iter().filter_map(|&m| layout.offset(dest_cell, m)).collect();
                    if neighbors.is_empty() {
                        row[s] += spec.slip_prob;
                    } else {
                        let share = spec.slip_prob / neighbors.len() as f64;
                        for n in neighbors {
                            row[n] += share;
                        }
                    }
                }
                let p_goal = row[layout.goal];
                reward[s * na + a] = spec.goal_reward * p_goal + spec.step_reward * (1.0 - p_goal);
            }
        }

        let mut mdp = TabularMdp::new(ns, na, transition, reward, spec.discount, terminal)?
            .with_reward_noise(spec.reward_noise_std)?;
        if !starts.is_empty() {
            mdp = mdp.with_start_states(starts)?;
        }
        Ok(Self { mdp, layout })
    }
}

/// Builds the Gridworld MDP for `spec`.
pub fn build_gridworld(spec: &GridworldSpec) -> Result<TabularMdp> {
    Gridworld::build(spec).map(|g| g.mdp)
}
