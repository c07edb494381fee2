//! The 6×6 grid world: positions, compass moves, simultaneous stepping and
//! the agent's local observation of the adversary.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;

/// Side length of the square grid.
pub const GRID_SIZE: u8 = 6;
/// Number of cells, and therefore of agent locations.
pub const N_CELLS: usize = (GRID_SIZE as usize) * (GRID_SIZE as usize);
/// Default episode length limit.
pub const DEFAULT_TIMEOUT: u32 = 100;

pub const STEP_REWARD: f64 = -1.0;
pub const GOAL_REWARD: f64 = 100.0;
pub const COLLISION_REWARD: f64 = -100.0;
pub const ADVERSARY_COLLISION_REWARD: f64 = 100.0;

/// A cell of the grid. Row 0 is the top row, column 0 the left column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    row: u8,
    col: u8,
}

impl GridPos {
    pub fn new(row: u8, col: u8) -> Result<Self, ConfigError> {
        if row >= GRID_SIZE || col >= GRID_SIZE {
            return Err(ConfigError::OffGrid { row, col });
        }
        Ok(GridPos { row, col })
    }

    /// Constructor for compile-time constants; panics when off the grid.
    pub const fn at(row: u8, col: u8) -> Self {
        assert!(row < GRID_SIZE && col < GRID_SIZE, "cell off the grid");
        GridPos { row, col }
    }

    pub fn row(self) -> u8 {
        self.row
    }

    pub fn col(self) -> u8 {
        self.col
    }

    /// Row-major index in `0..36`.
    pub fn index(self) -> usize {
        self.row as usize * GRID_SIZE as usize + self.col as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= N_CELLS {
            return None;
        }
        let size = GRID_SIZE as usize;
        Some(GridPos {
            row: (index / size) as u8,
            col: (index % size) as u8,
        })
    }

    pub fn manhattan(self, other: GridPos) -> u32 {
        (self.row.abs_diff(other.row) + self.col.abs_diff(other.col)) as u32
    }

    /// Every cell in row-major order.
    pub fn all() -> impl Iterator<Item = GridPos> {
        (0..N_CELLS).filter_map(GridPos::from_index)
    }

    /// The cell one move away, or `None` if the move would leave the grid.
    pub fn neighbor(self, action: Action) -> Option<GridPos> {
        let (dr, dc) = action.delta();
        let row = self.row as i16 + dr as i16;
        let col = self.col as i16 + dc as i16;
        let size = GRID_SIZE as i16;
        if (0..size).contains(&row) && (0..size).contains(&col) {
            Some(GridPos {
                row: row as u8,
                col: col as u8,
            })
        } else {
            None
        }
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

impl FromStr for GridPos {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::Parse(format!("expected \"row,col\", got {s:?}"));
        let (r, c) = s.trim().split_once(',').ok_or_else(bad)?;
        let row = r.trim().parse::<u8>().map_err(|_| bad())?;
        let col = c.trim().parse::<u8>().map_err(|_| bad())?;
        GridPos::new(row, col)
    }
}

/// Compass moves. The discriminant is the stable table/serialization index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Right = 0,
    Up = 1,
    Down = 2,
    Left = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Right, Action::Up, Action::Down, Action::Left];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    /// (row delta, column delta)
    pub fn delta(self) -> (i8, i8) {
        match self {
            Action::Right => (0, 1),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Action::Right => 'R',
            Action::Up => 'U',
            Action::Down => 'D',
            Action::Left => 'L',
        }
    }

    pub fn from_symbol(c: char) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.symbol() == c)
    }

    /// The move taking `from` to the adjacent cell `to`, if they are adjacent.
    pub fn between(from: GridPos, to: GridPos) -> Option<Action> {
        Action::ALL
            .into_iter()
            .find(|&a| from.neighbor(a) == Some(to))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Moves one cell; a move that would leave the grid leaves the position unchanged.
pub fn apply_move(pos: GridPos, action: Action) -> GridPos {
    pos.neighbor(action).unwrap_or(pos)
}

/// Static layout of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    pub goal: GridPos,
    pub agent_start: GridPos,
    pub adversary_start: GridPos,
    pub timeout_steps: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            goal: GridPos::at(5, 5),
            agent_start: GridPos::at(0, 0),
            adversary_start: GridPos::at(0, 0),
            timeout_steps: DEFAULT_TIMEOUT,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.goal == self.agent_start {
            return Err(ConfigError::Invalid(format!(
                "goal {} coincides with the agent start",
                self.goal
            )));
        }
        if self.timeout_steps == 0 {
            return Err(ConfigError::Invalid("timeout_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Starting positions `(agent, adversary)` for a fresh episode.
pub fn reset(config: &EnvConfig) -> Result<(GridPos, GridPos), ConfigError> {
    config.validate()?;
    Ok((config.agent_start, config.adversary_start))
}

/// How a step ended the episode, if it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    Continue,
    Goal,
    Collision,
    Timeout,
}

impl Terminal {
    pub fn is_terminal(self) -> bool {
        self != Terminal::Continue
    }

    /// Goal and collision end the task; a timeout only truncates it.
    pub fn is_absorbing(self) -> bool {
        matches!(self, Terminal::Goal | Terminal::Collision)
    }

    pub fn name(self) -> &'static str {
        match self {
            Terminal::Continue => "none",
            Terminal::Goal => "goal",
            Terminal::Collision => "collision",
            Terminal::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_agent: GridPos,
    pub next_adversary: GridPos,
    pub agent_reward: f64,
    pub adversary_reward: f64,
    pub terminal: Terminal,
}

/// Applies both moves simultaneously. `step_index` is zero-based; the step
/// with index `timeout_steps - 1` ends the episode with `Timeout` unless it
/// already ended by goal or collision. A collision takes precedence over
/// reaching the goal.
pub fn step(
    config: &EnvConfig,
    agent: GridPos,
    adversary: GridPos,
    agent_action: Action,
    adversary_action: Action,
    step_index: u32,
) -> StepOutcome {
    let next_agent = apply_move(agent, agent_action);
    let next_adversary = apply_move(adversary, adversary_action);
    let (agent_reward, adversary_reward, terminal) = if next_agent == next_adversary {
        (COLLISION_REWARD, ADVERSARY_COLLISION_REWARD, Terminal::Collision)
    } else if next_agent == config.goal {
        (GOAL_REWARD, 0.0, Terminal::Goal)
    } else if step_index + 1 >= config.timeout_steps {
        (STEP_REWARD, 0.0, Terminal::Timeout)
    } else {
        (STEP_REWARD, 0.0, Terminal::Continue)
    };
    StepOutcome {
        next_agent,
        next_adversary,
        agent_reward,
        adversary_reward,
        terminal,
    }
}

/// What an actor sees of the other actor: which of its four neighbor cells
/// the other occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    pub self_pos: GridPos,
    pub neighbor_occupancy: [bool; 4],
    pub adversary_visible: bool,
}

impl Observation {
    /// Bit `i` set iff the neighbor in direction `Action::from_index(i)` is occupied.
    pub fn occupancy_bits(&self) -> u8 {
        self.neighbor_occupancy
            .iter()
            .enumerate()
            .fold(0, |bits, (i, &occ)| if occ { bits | (1 << i) } else { bits })
    }

    /// True iff taking `action` moves into the observed adversary's cell.
    pub fn leads_to_adversary(&self, action: Action) -> bool {
        self.neighbor_occupancy[action.index()]
    }
}

pub fn observe(own: GridPos, other: GridPos) -> Observation {
    let mut neighbor_occupancy = [false; 4];
    for a in Action::ALL {
        neighbor_occupancy[a.index()] = own.neighbor(a) == Some(other);
    }
    Observation {
        self_pos: own,
        neighbor_occupancy,
        adversary_visible: neighbor_occupancy.iter().any(|&b| b),
    }
}

/// One agent step of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub agent: GridPos,
    pub adversary: GridPos,
    pub agent_action: Action,
    pub raw_reward: f64,
    pub shaped_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: Vec<StepRecord>,
    pub final_agent: GridPos,
    pub final_adversary: GridPos,
    pub cause: Terminal,
    /// Shaping potential of the first and last agent state (0 without shaping).
    pub initial_potential: f64,
    pub final_potential: f64,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn raw_return(&self) -> f64 {
        self.steps.iter().map(|s| s.raw_reward).sum()
    }

    pub fn collided(&self) -> bool {
        self.cause == Terminal::Collision
    }

    /// Agent cells visited, including the final one.
    pub fn agent_path(&self) -> impl Iterator<Item = GridPos> + '_ {
        self.steps
            .iter()
            .map(|s| s.agent)
            .chain(std::iter::once(self.final_agent))
    }

    /// One line per step: `agent;adversary;action;raw;shaped`, then the cause.
    pub fn to_trace(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!(
                "{};{};{};{};{}\n",
                s.agent, s.adversary, s.agent_action, s.raw_reward, s.shaped_reward
            ));
        }
        out.push_str(&format!(
            "end;{};{};{}\n",
            self.final_agent,
            self.final_adversary,
            self.cause.name()
        ));
        out
    }
}
