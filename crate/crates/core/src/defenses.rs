//! Defense mechanisms for the agent: potential-based reward shaping with two
//! potentials, Q-learning with an observation table, and the modified
//! Q-learning that falls back to the second-best action.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::ConfigError;
use crate::grid::{apply_move, Action, GridPos, Observation, N_CELLS, STEP_REWARD};
use crate::learners::{argmax_row, explore, DeterministicMdp, QTable, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialKind {
    ManhattanToGoal,
    CollisionFreeProb,
}

/// Orientation of the distance potential. `TowardGoal` uses the negated
/// distance so that the potential grows as the agent approaches the goal;
/// `Literal` uses the plain distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PotentialSign {
    #[default]
    TowardGoal,
    Literal,
}

impl FromStr for PotentialSign {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toward-goal" => Ok(PotentialSign::TowardGoal),
            "literal" => Ok(PotentialSign::Literal),
            other => Err(ConfigError::Parse(format!(
                "unknown potential sign `{other}` (expected toward-goal|literal)"
            ))),
        }
    }
}

impl fmt::Display for PotentialSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialSign::TowardGoal => "toward-goal",
            PotentialSign::Literal => "literal",
        })
    }
}

/// Per-cell move counters for the collision-free probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionStats {
    moves_into: Vec<u32>,
    collision_free: Vec<u32>,
}

impl Default for CollisionStats {
    fn default() -> Self {
        CollisionStats {
            moves_into: vec![0; N_CELLS],
            collision_free: vec![0; N_CELLS],
        }
    }
}

impl CollisionStats {
    pub fn record(&mut self, cell: GridPos, collided: bool) {
        self.moves_into[cell.index()] += 1;
        if !collided {
            self.collision_free[cell.index()] += 1;
        }
    }

    pub fn moves_into(&self, cell: GridPos) -> u32 {
        self.moves_into[cell.index()]
    }

    pub fn collision_free_moves_into(&self, cell: GridPos) -> u32 {
        self.collision_free[cell.index()]
    }

    /// Fraction of moves into `cell` that did not collide; 1 for unvisited cells.
    pub fn p_collision_free(&self, cell: GridPos) -> f64 {
        let total = self.moves_into[cell.index()];
        if total == 0 {
            1.0
        } else {
            self.collision_free[cell.index()] as f64 / total as f64
        }
    }
}

pub fn potential(
    kind: PotentialKind,
    state: GridPos,
    goal: GridPos,
    raw_reward: f64,
    stats: &CollisionStats,
    sign: PotentialSign,
) -> f64 {
    match kind {
        PotentialKind::ManhattanToGoal => {
            let d = state.manhattan(goal) as f64;
            match sign {
                PotentialSign::TowardGoal => -d,
                PotentialSign::Literal => d,
            }
        }
        PotentialKind::CollisionFreeProb => raw_reward * stats.p_collision_free(state),
    }
}

/// `r + γ·φ(s') − φ(s)`
pub fn shape_reward(reward: f64, phi_state: f64, phi_next: f64, gamma: f64) -> f64 {
    reward + gamma * phi_next - phi_state
}

/// Tracks the potential of the current state across an episode so that
/// each state's potential is computed once, on arrival.
#[derive(Debug, Clone)]
pub struct Shaper {
    pub kind: PotentialKind,
    pub sign: PotentialSign,
    pub goal: GridPos,
    pub gamma: f64,
    current: f64,
}

impl Shaper {
    pub fn new(kind: PotentialKind, sign: PotentialSign, goal: GridPos, gamma: f64) -> Self {
        Shaper {
            kind,
            sign,
            goal,
            gamma,
            current: 0.0,
        }
    }

    /// Potential of the start cell; its reward is that of an ordinary cell.
    pub fn begin_episode(&mut self, start: GridPos, stats: &CollisionStats) -> f64 {
        self.current = potential(self.kind, start, self.goal, STEP_REWARD, stats, self.sign);
        self.current
    }

    pub fn current_potential(&self) -> f64 {
        self.current
    }

    /// Shaped reward for arriving at `next` with raw reward `reward`.
    pub fn shape(&mut self, reward: f64, next: GridPos, stats: &CollisionStats) -> f64 {
        let phi_next = potential(self.kind, next, self.goal, reward, stats, self.sign);
        let shaped = shape_reward(reward, self.current, phi_next, self.gamma);
        self.current = phi_next;
        shaped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefenseMechanism {
    None,
    Pbrs(PotentialKind),
    QWithObservations,
    ModifiedQ,
}

impl DefenseMechanism {
    pub fn potential(self) -> Option<PotentialKind> {
        match self {
            DefenseMechanism::Pbrs(kind) => Some(kind),
            _ => None,
        }
    }
}

impl fmt::Display for DefenseMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefenseMechanism::None => "none",
            DefenseMechanism::Pbrs(PotentialKind::ManhattanToGoal) => "pbrs-distance",
            DefenseMechanism::Pbrs(PotentialKind::CollisionFreeProb) => "pbrs-collision",
            DefenseMechanism::QWithObservations => "q-obs",
            DefenseMechanism::ModifiedQ => "modified-q",
        })
    }
}

impl FromStr for DefenseMechanism {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(DefenseMechanism::None),
            "pbrs-distance" => Ok(DefenseMechanism::Pbrs(PotentialKind::ManhattanToGoal)),
            "pbrs-collision" => Ok(DefenseMechanism::Pbrs(PotentialKind::CollisionFreeProb)),
            "q-obs" => Ok(DefenseMechanism::QWithObservations),
            "modified-q" => Ok(DefenseMechanism::ModifiedQ),
            other => Err(ConfigError::Parse(format!(
                "unknown defense `{other}` (expected none|pbrs-distance|pbrs-collision|q-obs|modified-q)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseConfig {
    pub mechanism: DefenseMechanism,
    /// Reward written into the observation table when the greedy move
    /// heads into the adversary.
    pub adv_penalty: f64,
    pub potential_sign: PotentialSign,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            mechanism: DefenseMechanism::None,
            adv_penalty: -100.0,
            potential_sign: PotentialSign::TowardGoal,
        }
    }
}

impl DefenseConfig {
    pub fn new(mechanism: DefenseMechanism) -> Self {
        DefenseConfig {
            mechanism,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.adv_penalty >= 0.0 || self.adv_penalty.is_nan() {
            return Err(ConfigError::Invalid("adv_penalty must be negative".into()));
        }
        Ok(())
    }
}

/// The observation Q-function. A state's row is copied from the main table
/// the first time the adversary is met there; until then reads fall
/// through to the main table.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    table: QTable,
    materialized: Vec<bool>,
}

impl ObservationTable {
    pub fn new(n_states: usize) -> Self {
        ObservationTable {
            table: QTable::new(n_states),
            materialized: vec![false; n_states],
        }
    }

    pub fn is_materialized(&self, state: usize) -> bool {
        self.materialized[state]
    }

    /// The overlay's own storage; zero wherever nothing was materialized.
    pub fn raw(&self) -> &QTable {
        &self.table
    }

    pub fn row<'a>(&'a self, q: &'a QTable, state: usize) -> &'a [f64] {
        if self.materialized[state] {
            self.table.row(state)
        } else {
            q.row(state)
        }
    }

    fn materialize(&mut self, q: &QTable, state: usize) {
        if !self.materialized[state] {
            self.table.set_row(state, q.row(state));
            self.materialized[state] = true;
        }
    }

    /// Backup of `(state, action)` with the adversary penalty as reward.
    #[allow(clippy::too_many_arguments)]
    pub fn penalize(
        &mut self,
        q: &QTable,
        state: usize,
        action: Action,
        next: usize,
        penalty: f64,
        alpha: f64,
        gamma: f64,
    ) {
        self.materialize(q, state);
        let bootstrap = self
            .row(q, next)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let old = self.table.get(state, action);
        self.table
            .set(state, action, old + alpha * (penalty + gamma * bootstrap - old));
    }
}

/// Learning parameters needed by the observation-table backup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationUpdate {
    pub alpha: f64,
    pub gamma: f64,
    pub penalty: f64,
    /// When false the tables are frozen and only the selection logic runs.
    pub learn: bool,
}

/// ε-greedy over the main table, except that a greedy move into the
/// observed adversary triggers a penalty backup in the observation table and
/// the action is reselected greedily from it.
pub fn select_with_observations<R: Rng + ?Sized>(
    q: &QTable,
    q_obs: &mut ObservationTable,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
    update: ObservationUpdate,
) -> Action {
    if let Some(a) = explore(epsilon, rng) {
        return a;
    }
    let state = obs.self_pos.index();
    let act = q.argmax(state);
    if !obs.leads_to_adversary(act) {
        return act;
    }
    if update.learn {
        let next = apply_move(obs.self_pos, act).index();
        q_obs.penalize(
            q,
            state,
            act,
            next,
            update.penalty,
            update.alpha,
            update.gamma,
        );
    }
    argmax_row(q_obs.row(q, state))
}

/// ε-greedy, except that a greedy move into the observed adversary is
/// replaced by the second-ranked action (once, without further checks).
pub fn select_modified<R: Rng + ?Sized>(
    q: &QTable,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if let Some(a) = explore(epsilon, rng) {
        return a;
    }
    let ranked = q.ranked(obs.self_pos.index());
    if obs.leads_to_adversary(ranked[0]) {
        ranked[1]
    } else {
        ranked[0]
    }
}

/// A deterministic MDP with potential-based shaping applied to every reward.
pub struct ShapedMdp<'a, M: ?Sized> {
    pub inner: &'a M,
    /// Potential per state index.
    pub potential: Vec<f64>,
    pub gamma: f64,
}

impl<M: DeterministicMdp + ?Sized> DeterministicMdp for ShapedMdp<'_, M> {
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn is_terminal(&self, state: usize) -> bool {
        self.inner.is_terminal(state)
    }

    fn transition(&self, state: usize, action: Action) -> Transition {
        let t = self.inner.transition(state, action);
        Transition {
            reward: shape_reward(
                t.reward,
                self.potential[state],
                self.potential[t.next],
                self.gamma,
            ),
            ..t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::observe;
    use crate::learners::{select_epsilon_greedy, value_iteration, GridMdp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const GOAL: GridPos = GridPos::at(5, 5);

    #[test]
    fn manhattan_potential() {
        let stats = CollisionStats::default();
        let m = PotentialKind::ManhattanToGoal;
        let s = PotentialSign::TowardGoal;
        assert_eq!(potential(m, GridPos::at(0, 0), GOAL, -1.0, &stats, s), -10.0);
        assert_eq!(potential(m, GOAL, GOAL, -1.0, &stats, s), 0.0);
        assert_eq!(
            potential(m, GridPos::at(0, 0), GOAL, -1.0, &stats, PotentialSign::Literal),
            10.0
        );
    }

    #[test]
    fn collision_free_potential() {
        let mut stats = CollisionStats::default();
        let cell = GridPos::at(2, 2);
        for i in 0..10 {
            stats.record(cell, i == 0);
        }
        let phi = potential(
            PotentialKind::CollisionFreeProb,
            cell,
            GOAL,
            -1.0,
            &stats,
            PotentialSign::TowardGoal,
        );
        assert!((phi + 0.9).abs() < 1e-15);
        assert_eq!(stats.p_collision_free(GridPos::at(0, 1)), 1.0);
    }

    #[test]
    fn shaping_arithmetic() {
        assert!((shape_reward(-1.0, -10.0, -9.0, 0.9) - 0.9).abs() < 1e-12);
        assert_eq!(shape_reward(-1.0, 0.0, 0.0, 0.9), -1.0);
        let c = 3.0;
        assert!((shape_reward(-1.0, c, c, 0.9) - (-1.0 + (0.9 - 1.0) * c)).abs() < 1e-12);
    }

    #[test]
    fn observation_branch_not_taken_without_adversary() {
        let mut q = QTable::new(N_CELLS);
        q.set(14, Action::Down, 2.0);
        let mut q_obs = ObservationTable::new(N_CELLS);
        let obs = observe(GridPos::from_index(14).unwrap(), GridPos::at(0, 0));
        let upd = ObservationUpdate {
            alpha: 0.1,
            gamma: 0.9,
            penalty: -100.0,
            learn: true,
        };
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = select_with_observations(&q, &mut q_obs, &obs, 0.3, &mut r1, upd);
            let b = select_epsilon_greedy(&q, 14, 0.3, &mut r2);
            assert_eq!(a, b);
        }
        assert_eq!(q_obs.raw(), &QTable::new(N_CELLS));
    }

    #[test]
    fn observation_branch_penalizes_and_reselects() {
        let q = QTable::new(N_CELLS);
        let mut q_obs = ObservationTable::new(N_CELLS);
        let me = GridPos::at(3, 3);
        let obs = observe(me, GridPos::at(3, 4));
        let upd = ObservationUpdate {
            alpha: 0.1,
            gamma: 0.9,
            penalty: -100.0,
            learn: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = select_with_observations(&q, &mut q_obs, &obs, 0.0, &mut rng, upd);
        assert_eq!(q_obs.raw().get(me.index(), Action::Right), 0.1 * -100.0);
        assert_ne!(a, Action::Right);
        assert_eq!(a, Action::Up);
    }

    #[test]
    fn observation_branch_keeps_argmax_when_adversary_elsewhere() {
        let mut q = QTable::new(N_CELLS);
        let me = GridPos::at(3, 3);
        q.set(me.index(), Action::Down, 1.0);
        let mut q_obs = ObservationTable::new(N_CELLS);
        let obs = observe(me, GridPos::at(3, 4));
        let upd = ObservationUpdate {
            alpha: 0.1,
            gamma: 0.9,
            penalty: -100.0,
            learn: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = select_with_observations(&q, &mut q_obs, &obs, 0.0, &mut rng, upd);
        assert_eq!(a, Action::Down);
        assert!(!q_obs.is_materialized(me.index()));
    }

    #[test]
    fn modified_selection() {
        let me = GridPos::at(3, 3);
        let mut q = QTable::new(N_CELLS);
        q.set_row(me.index(), &[5.0, 4.0, 3.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let blocked = observe(me, GridPos::at(3, 4));
        assert_eq!(select_modified(&q, &blocked, 0.0, &mut rng), Action::Up);
        let clear = observe(me, GridPos::at(0, 0));
        assert_eq!(select_modified(&q, &clear, 0.0, &mut rng), Action::Right);

        let flat = QTable::new(N_CELLS);
        assert_eq!(select_modified(&flat, &blocked, 0.0, &mut rng), Action::Up);
    }

    #[test]
    fn fallback_is_second_ranked() {
        let me = GridPos::at(3, 3);
        let mut q = QTable::new(N_CELLS);
        q.set_row(me.index(), &[1.0, 3.0, 2.0, 0.0]);
        let obs = observe(me, GridPos::at(2, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_modified(&q, &obs, 0.0, &mut rng), Action::Down);
    }

    #[test]
    fn defense_names_roundtrip() {
        for name in ["none", "pbrs-distance", "pbrs-collision", "q-obs", "modified-q"] {
            let d: DefenseMechanism = name.parse().unwrap();
            assert_eq!(d.to_string(), name);
        }
        assert!("pbrs".parse::<DefenseMechanism>().is_err());
        let bad = DefenseConfig {
            adv_penalty: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shaping_preserves_greedy_policy() {
        let gamma = 0.9;
        let mdp = GridMdp::default();
        let stats = CollisionStats::default();
        let phi: Vec<f64> = GridPos::all()
            .map(|p| {
                potential(
                    PotentialKind::ManhattanToGoal,
                    p,
                    mdp.goal,
                    -1.0,
                    &stats,
                    PotentialSign::TowardGoal,
                )
            })
            .collect();
        let shaped = ShapedMdp {
            inner: &mdp,
            potential: phi,
            gamma,
        };
        let plain = value_iteration(&mdp, gamma, 1e-12).unwrap();
        let with = value_iteration(&shaped, gamma, 1e-12).unwrap();
        assert_eq!(
            plain.greedy_policy(&mdp, gamma),
            with.greedy_policy(&shaped, gamma)
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn discounted_shaping_telescopes(
                cells in proptest::collection::vec(0usize..36, 2..60),
                gamma in 0.0f64..0.999,
            ) {
                let stats = CollisionStats::default();
                let path: Vec<GridPos> = cells.iter().map(|&i| GridPos::from_index(i).unwrap()).collect();
                let mut sh = Shaper::new(PotentialKind::ManhattanToGoal, PotentialSign::TowardGoal, GOAL, gamma);
                let phi0 = sh.begin_episode(path[0], &stats);
                let mut total = 0.0;
                for (t, &next) in path[1..].iter().enumerate() {
                    let shaped = sh.shape(-1.0, next, &stats);
                    total += gamma.powi(t as i32) * (shaped + 1.0);
                }
                let steps = (path.len() - 1) as i32;
                let expect = gamma.powi(steps) * sh.current_potential() - phi0;
                prop_assert!((total - expect).abs() < 1e-9);
            }

            #[test]
            fn p_collision_free_in_unit_interval(events in proptest::collection::vec((0usize..36, any::<bool>()), 0..200)) {
                let mut stats = CollisionStats::default();
                for (i, c) in events {
                    let cell = GridPos::from_index(i).unwrap();
                    let before = stats.moves_into(cell);
                    stats.record(cell, c);
                    prop_assert!(stats.moves_into(cell) > before);
                    prop_assert!(stats.collision_free_moves_into(cell) <= stats.moves_into(cell));
                }
                for p in GridPos::all() {
                    let pc = stats.p_collision_free(p);
                    prop_assert!((0.0..=1.0).contains(&pc));
                }
            }

            #[test]
            fn modified_avoids_observed_adversary(
                row in proptest::array::uniform4(-50.0f64..50.0),
                me in 0usize..36,
                dir in 0usize..4,
            ) {
                let me = GridPos::from_index(me).unwrap();
                let Some(adv) = me.neighbor(Action::ALL[dir]) else { return Ok(()); };
                let mut q = QTable::new(N_CELLS);
                q.set_row(me.index(), &row);
                let obs = observe(me, adv);
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let a = select_modified(&q, &obs, 0.0, &mut rng);
                prop_assert!(apply_move(me, a) != adv);
            }
        }
    }
}
