//! Tabular Q-learning, ε-greedy selection, the patrolling adversaries, and a
//! value-iteration solver used as a reference for the learners.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SolverError};
use crate::grid::{Action, GridPos, Observation, GOAL_REWARD, N_CELLS, STEP_REWARD};

/// Dense action-value table indexed by an opaque state key.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize) -> Self {
        QTable {
            n_states,
            values: vec![0.0; n_states * Action::COUNT],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state * Action::COUNT + action.index()]
    }

    pub fn set(&mut self, state: usize, action: Action, value: f64) {
        self.values[state * Action::COUNT + action.index()] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * Action::COUNT..(state + 1) * Action::COUNT]
    }

    pub fn set_row(&mut self, state: usize, row: &[f64]) {
        self.values[state * Action::COUNT..(state + 1) * Action::COUNT].copy_from_slice(row);
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest action index.
    pub fn argmax(&self, state: usize) -> Action {
        argmax_row(self.row(state))
    }

    /// Actions ordered best-first, ties by action index.
    pub fn ranked(&self, state: usize) -> [Action; 4] {
        ranked_row(self.row(state))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "state_key,action,value")?;
        for s in 0..self.n_states {
            for a in Action::ALL {
                writeln!(out, "{},{},{}", s, a.symbol(), self.get(s, a))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<QTable, ConfigError> {
        let mut rows = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ConfigError::Parse(e.to_string()))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || ConfigError::Parse(format!("q-table line {}: {line:?}", i + 1));
            let mut fields = line.split(',');
            let (Some(s), Some(a), Some(v), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad());
            };
            let s: usize = s.parse().map_err(|_| bad())?;
            let a = a
                .chars()
                .next()
                .and_then(Action::from_symbol)
                .ok_or_else(bad)?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            rows.push((s, a, v));
        }
        let n_states = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let mut q = QTable::new(n_states);
        for (s, a, v) in rows {
            q.set(s, a, v);
        }
        Ok(q)
    }
}

pub(crate) fn argmax_row(row: &[f64]) -> Action {
    let mut best = 0;
    for i in 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    Action::ALL[best]
}

pub(crate) fn ranked_row(row: &[f64]) -> [Action; 4] {
    let mut order = Action::ALL;
    // stable: equal values keep index order
    order.sort_by(|a, b| row[b.index()].total_cmp(&row[a.index()]));
    order
}

/// Multiplicative per-episode decay with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            initial: 1.0,
            decay: 0.999,
            floor: 0.05,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, episode: u32) -> f64 {
        (self.initial * self.decay.powi(episode as i32)).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: EpsilonSchedule::default(),
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.epsilon;
        let checks = [
            (self.alpha > 0.0 && self.alpha <= 1.0, "alpha must lie in (0,1]"),
            (self.gamma >= 0.0 && self.gamma < 1.0, "gamma must lie in [0,1)"),
            ((0.0..=1.0).contains(&e.initial), "epsilon_start must lie in [0,1]"),
            ((0.0..=1.0).contains(&e.floor), "epsilon_floor must lie in [0,1]"),
            (e.decay > 0.0 && e.decay <= 1.0, "epsilon_decay must lie in (0,1]"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(ConfigError::Invalid(msg.into()));
            }
        }
        Ok(())
    }
}

/// With probability `epsilon` a uniformly random action, otherwise the
/// greedy action. Always consumes one uniform draw, plus one more when
/// exploring.
pub fn select_epsilon_greedy<R: Rng + ?Sized>(
    q: &QTable,
    state: usize,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    match explore(epsilon, rng) {
        Some(a) => a,
        None => q.argmax(state),
    }
}

/// The exploration half of ε-greedy: `Some(random action)` when exploring.
pub(crate) fn explore<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> Option<Action> {
    if rng.gen::<f64>() < epsilon {
        Some(Action::ALL[rng.gen_range(0..Action::COUNT)])
    } else {
        None
    }
}

/// One Q-learning backup. `next = None` marks a terminal transition, whose
/// bootstrap term is zero.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    action: Action,
    reward: f64,
    next: Option<usize>,
    alpha: f64,
    gamma: f64,
) {
    let bootstrap = next.map_or(0.0, |s| q.max_value(s));
    let old = q.get(state, action);
    q.set(state, action, old + alpha * (reward + gamma * bootstrap - old));
}

const PATROL3: [GridPos; 3] = [GridPos::at(5, 4), GridPos::at(4, 4), GridPos::at(4, 5)];
const PATROL5: [GridPos; 5] = [
    GridPos::at(5, 4),
    GridPos::at(4, 4),
    GridPos::at(4, 5),
    GridPos::at(3, 5),
    GridPos::at(3, 4),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversaryKind {
    Patrol3,
    Patrol5,
    Learning { with_observations: bool },
}

impl AdversaryKind {
    /// Cells of a patrol route in visiting order; `None` for the learner.
    pub fn route(self) -> Option<&'static [GridPos]> {
        match self {
            AdversaryKind::Patrol3 => Some(&PATROL3),
            AdversaryKind::Patrol5 => Some(&PATROL5),
            AdversaryKind::Learning { .. } => None,
        }
    }

    pub fn start(self) -> GridPos {
        match self.route() {
            Some(route) => route[0],
            None => GridPos::at(0, 0),
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, AdversaryKind::Learning { .. })
    }

    /// Size of the learning adversary's state space.
    pub fn n_states(self) -> usize {
        match self {
            AdversaryKind::Learning {
                with_observations: true,
            } => N_CELLS * 16,
            _ => N_CELLS,
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryKind::Patrol3 => "patrol3",
            AdversaryKind::Patrol5 => "patrol5",
            AdversaryKind::Learning {
                with_observations: false,
            } => "learning",
            AdversaryKind::Learning {
                with_observations: true,
            } => "learning-obs",
        })
    }
}

impl FromStr for AdversaryKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "patrol3" => Ok(AdversaryKind::Patrol3),
            "patrol5" => Ok(AdversaryKind::Patrol5),
            "learning" => Ok(AdversaryKind::Learning {
                with_observations: false,
            }),
            "learning-obs" => Ok(AdversaryKind::Learning {
                with_observations: true,
            }),
            other => Err(ConfigError::Parse(format!(
                "unknown adversary `{other}` (expected patrol3|patrol5|learning|learning-obs)"
            ))),
        }
    }
}

/// Position of a patroller at `tick`, walking its route forward and back.
/// Returns `None` for the learning adversary.
pub fn patrol_position(kind: AdversaryKind, tick: u64) -> Option<GridPos> {
    let route = kind.route()?;
    let n = route.len() as u64;
    if n == 1 {
        return Some(route[0]);
    }
    let period = 2 * (n - 1);
    let i = tick % period;
    let idx = if i < n { i } else { period - i };
    Some(route[idx as usize])
}

/// State key of the learning adversary: its own cell, optionally combined
/// with which of its neighbor cells hold the agent.
pub fn adversary_state_key(kind: AdversaryKind, own: GridPos, view: &Observation) -> usize {
    match kind {
        AdversaryKind::Learning {
            with_observations: true,
        } => own.index() * 16 + view.occupancy_bits() as usize,
        _ => own.index(),
    }
}

/// Outcome of one action in a deterministic MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub next: usize,
    /// The episode ends on arrival at `next`.
    pub ends: bool,
}

/// Deterministic four-action MDP used for dynamic-programming checks.
pub trait DeterministicMdp {
    fn n_states(&self) -> usize;
    fn is_terminal(&self, state: usize) -> bool;
    fn transition(&self, state: usize, action: Action) -> Transition;
}

/// The adversary-free grid: −1 per move, +100 on entering the goal, which
/// is terminal.
#[derive(Debug, Clone, Copy)]
pub struct GridMdp {
    pub goal: GridPos,
}

impl Default for GridMdp {
    fn default() -> Self {
        GridMdp {
            goal: GridPos::at(5, 5),
        }
    }
}

impl DeterministicMdp for GridMdp {
    fn n_states(&self) -> usize {
        N_CELLS
    }

    fn is_terminal(&self, state: usize) -> bool {
        state == self.goal.index()
    }

    fn transition(&self, state: usize, action: Action) -> Transition {
        let pos = GridPos::from_index(state).expect("state index on grid");
        let next = crate::grid::apply_move(pos, action);
        let ends = next == self.goal;
        Transition {
            reward: if ends { GOAL_REWARD } else { STEP_REWARD },
            next: next.index(),
            ends,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub iterations: u64,
}

impl ValueFunction {
    pub fn q_value<M: DeterministicMdp + ?Sized>(
        &self,
        mdp: &M,
        state: usize,
        action: Action,
        gamma: f64,
    ) -> f64 {
        let t = mdp.transition(state, action);
        let cont = if t.ends { 0.0 } else { self.values[t.next] };
        t.reward + gamma * cont
    }

    /// Greedy action per non-terminal state (ties to the lowest index).
    pub fn greedy_policy<M: DeterministicMdp + ?Sized>(
        &self,
        mdp: &M,
        gamma: f64,
    ) -> Vec<Option<Action>> {
        (0..mdp.n_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    return None;
                }
                let row: Vec<f64> = Action::ALL
                    .iter()
                    .map(|&a| self.q_value(mdp, s, a, gamma))
                    .collect();
                Some(argmax_row(&row))
            })
            .collect()
    }
}

pub const VALUE_ITERATION_CAP: u64 = 1_000_000;

/// Jacobi value iteration. Stops once a full sweep moves no entry by more
/// than `tol`.
pub fn value_iteration<M: DeterministicMdp + ?Sized>(
    mdp: &M,
    gamma: f64,
    tol: f64,
) -> Result<ValueFunction, SolverError> {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=VALUE_ITERATION_CAP {
        residual = 0.0;
        for s in 0..n {
            next[s] = if mdp.is_terminal(s) {
                0.0
            } else {
                Action::ALL
                    .iter()
                    .map(|&a| {
                        let t = mdp.transition(s, a);
                        t.reward + if t.ends { 0.0 } else { gamma * v[t.next] }
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            residual = residual.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if residual < tol {
            return Ok(ValueFunction {
                values: v,
                iterations: it,
            });
        }
    }
    Err(SolverError::NoConvergence {
        iterations: VALUE_ITERATION_CAP,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::observe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_zero_is_greedy() {
        let mut q = QTable::new(1);
        q.set(0, Action::Right, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(select_epsilon_greedy(&q, 0, 0.0, &mut rng), Action::Right);
        }
    }

    fn frequencies(q: &QTable, eps: f64, n: usize, seed: u64) -> [f64; 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_epsilon_greedy(q, 0, eps, &mut rng).index()] += 1;
        }
        counts.map(|c| c as f64 / n as f64)
    }

    fn within_3_sigma(freq: f64, p: f64, n: usize) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (freq - p).abs() <= 3.0 * sigma
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let q = QTable::new(1);
        let n = 40_000;
        let f = frequencies(&q, 1.0, n, 7);
        for x in f {
            assert!(within_3_sigma(x, 0.25, n), "{f:?}");
        }
    }

    #[test]
    fn epsilon_mixture() {
        let mut q = QTable::new(1);
        q.set(0, Action::Down, 3.0);
        let n = 40_000;
        let f = frequencies(&q, 0.2, n, 11);
        let expected = [0.05, 0.05, 0.85, 0.05];
        for (x, p) in f.iter().zip(expected) {
            assert!(within_3_sigma(*x, p, n), "{f:?}");
        }
    }

    #[test]
    fn q_update_examples() {
        let mut q = QTable::new(2);
        q_update(&mut q, 0, Action::Up, -1.0, Some(1), 0.1, 0.9);
        assert!((q.get(0, Action::Up) + 0.1).abs() < 1e-15);

        let mut q = QTable::new(2);
        q_update(&mut q, 0, Action::Up, 100.0, None, 1.0, 0.9);
        assert_eq!(q.get(0, Action::Up), 100.0);
    }

    #[test]
    fn q_update_touches_one_entry() {
        let mut q = QTable::new(3);
        for s in 0..3 {
            for a in Action::ALL {
                q.set(s, a, (s * 4 + a.index()) as f64);
            }
        }
        let before = q.clone();
        q_update(&mut q, 1, Action::Left, 5.0, Some(2), 0.5, 0.9);
        let mut changed = 0;
        for s in 0..3 {
            for a in Action::ALL {
                if q.get(s, a) != before.get(s, a) {
                    changed += 1;
                    assert_eq!((s, a), (1, Action::Left));
                }
            }
        }
        assert_eq!(changed, 1);
    }

    /// Two states: from 0 every action moves to 1 (reward −1) except Right,
    /// which ends with reward 10; from 1 Right ends with reward 5, others
    /// loop to 0 with reward −1.
    struct TwoState;

    impl DeterministicMdp for TwoState {
        fn n_states(&self) -> usize {
            2
        }
        fn is_terminal(&self, _: usize) -> bool {
            false
        }
        fn transition(&self, s: usize, a: Action) -> Transition {
            match (s, a) {
                (0, Action::Right) => Transition { reward: 10.0, next: 0, ends: true },
                (0, _) => Transition { reward: -1.0, next: 1, ends: false },
                (_, Action::Right) => Transition { reward: 5.0, next: 1, ends: true },
                _ => Transition { reward: -1.0, next: 0, ends: false },
            }
        }
    }

    #[test]
    fn q_learning_converges_to_value_iteration() {
        let gamma = 0.9;
        let mdp = TwoState;
        let vf = value_iteration(&mdp, gamma, 1e-12).unwrap();
        // analytic: V(0) = 10, V(1) = max(5, -1 + 0.9*10) = 8
        assert!((vf.values[0] - 10.0).abs() < 1e-9);
        assert!((vf.values[1] - 8.0).abs() < 1e-9);

        let mut q = QTable::new(2);
        for _ in 0..2000 {
            for s in 0..2 {
                for a in Action::ALL {
                    let t = mdp.transition(s, a);
                    q_update(&mut q, s, a, t.reward, (!t.ends).then_some(t.next), 0.5, gamma);
                }
            }
        }
        for s in 0..2 {
            for a in Action::ALL {
                let expect = vf.q_value(&mdp, s, a, gamma);
                assert!((q.get(s, a) - expect).abs() < 1e-6, "{s} {a}");
            }
        }
    }

    #[test]
    fn patrol_sequences() {
        use AdversaryKind::*;
        assert_eq!(patrol_position(Patrol3, 0), Some(GridPos::at(5, 4)));
        assert_eq!(patrol_position(Patrol3, 2), Some(GridPos::at(4, 5)));
        assert_eq!(patrol_position(Patrol3, 3), Some(GridPos::at(4, 4)));
        assert_eq!(patrol_position(Patrol3, 4), Some(GridPos::at(5, 4)));
        // unrolled period-8 reflection over the five cells
        let unrolled = [(5, 4), (4, 4), (4, 5), (3, 5), (3, 4), (3, 5), (4, 5), (4, 4)];
        for (t, &(r, c)) in unrolled.iter().cycle().take(24).enumerate() {
            assert_eq!(patrol_position(Patrol5, t as u64), Some(GridPos::at(r, c)));
        }
        assert_eq!(patrol_position(Patrol5, 7), Some(GridPos::at(4, 4)));
        assert_eq!(
            patrol_position(Learning { with_observations: false }, 3),
            None
        );
    }

    #[test]
    fn patrol_moves_are_adjacent() {
        for kind in [AdversaryKind::Patrol3, AdversaryKind::Patrol5] {
            for t in 0..16 {
                let a = patrol_position(kind, t).unwrap();
                let b = patrol_position(kind, t + 1).unwrap();
                assert!(Action::between(a, b).is_some());
            }
        }
    }

    #[test]
    fn adversary_keys() {
        let plain = AdversaryKind::Learning { with_observations: false };
        let seeing = AdversaryKind::Learning { with_observations: true };
        let own = GridPos::at(2, 3);
        let far = observe(own, GridPos::at(5, 5));
        assert_eq!(adversary_state_key(plain, own, &far), 15);
        let right = observe(own, GridPos::at(2, 4));
        assert_eq!(adversary_state_key(seeing, own, &right), 15 * 16 + 0b0001);

        let mut seen = std::collections::HashSet::new();
        for p in GridPos::all() {
            for bits in 0u8..16 {
                let obs = Observation {
                    self_pos: p,
                    neighbor_occupancy: [0, 1, 2, 3].map(|i| bits & (1 << i) != 0),
                    adversary_visible: bits != 0,
                };
                assert!(seen.insert(adversary_state_key(seeing, p, &obs)));
            }
        }
        assert_eq!(seen.len(), seeing.n_states());
    }

    /// Closed form from BFS shortest-path length d: the optimal return is
    /// d−1 steps of −1 followed by the goal reward.
    fn shortest_path_values(goal: GridPos, gamma: f64) -> Vec<f64> {
        use std::collections::VecDeque;
        let mut dist = vec![usize::MAX; N_CELLS];
        dist[goal.index()] = 0;
        let mut queue = VecDeque::from([goal]);
        while let Some(p) = queue.pop_front() {
            for a in Action::ALL {
                if let Some(n) = p.neighbor(a) {
                    if dist[n.index()] == usize::MAX {
                        dist[n.index()] = dist[p.index()] + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        dist.iter()
            .map(|&d| {
                if d == 0 {
                    return 0.0;
                }
                let steps: f64 = (0..d - 1).map(|k| -gamma.powi(k as i32)).sum();
                steps + gamma.powi(d as i32 - 1) * GOAL_REWARD
            })
            .collect()
    }

    #[test]
    fn grid_value_iteration_matches_shortest_paths() {
        let mdp = GridMdp::default();
        let vf = value_iteration(&mdp, 0.9, 1e-12).unwrap();
        let oracle = shortest_path_values(mdp.goal, 0.9);
        for s in 0..N_CELLS {
            assert!((vf.values[s] - oracle[s]).abs() < 1e-9, "state {s}");
        }
        assert!((vf.values[GridPos::at(5, 4).index()] - 100.0).abs() < 1e-12);
        assert!(vf.values[GridPos::at(5, 4).index()] >= vf.values[0]);
    }

    #[test]
    fn value_iteration_fixed_point() {
        let mdp = GridMdp::default();
        let tol = 1e-8;
        let gamma = 0.9;
        let vf = value_iteration(&mdp, gamma, tol).unwrap();
        for s in 0..N_CELLS {
            if mdp.is_terminal(s) {
                continue;
            }
            let backup = Action::ALL
                .iter()
                .map(|&a| vf.q_value(&mdp, s, a, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((backup - vf.values[s]).abs() <= tol);
        }
    }

    #[test]
    fn greedy_path_is_manhattan_optimal() {
        let mdp = GridMdp::default();
        let gamma = 0.9;
        let vf = value_iteration(&mdp, gamma, 1e-10).unwrap();
        let policy = vf.greedy_policy(&mdp, gamma);
        let mut pos = GridPos::at(0, 0);
        let mut steps = 0;
        while pos != mdp.goal {
            pos = crate::grid::apply_move(pos, policy[pos.index()].unwrap());
            steps += 1;
            assert!(steps <= 36);
        }
        assert_eq!(steps, 10);
    }

    #[test]
    fn schedule_and_config() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(1) - 0.999).abs() < 1e-15);
        assert_eq!(EpsilonSchedule { floor: 0.5, ..s }.at(5000), 0.5);
        assert!(LearnerConfig::default().validate().is_ok());
        let bad = LearnerConfig {
            gamma: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ranking_ties_by_index() {
        assert_eq!(
            ranked_row(&[5.0, 4.0, 3.0, 2.0]),
            [Action::Right, Action::Up, Action::Down, Action::Left]
        );
        assert_eq!(
            ranked_row(&[0.0, 1.0, 1.0, 0.0]),
            [Action::Up, Action::Down, Action::Right, Action::Left]
        );
        assert_eq!(argmax_row(&[2.0, 2.0, 1.0, 2.0]), Action::Right);
    }

    #[test]
    fn csv_roundtrip() {
        let mut q = QTable::new(3);
        q.set(2, Action::Left, -0.1);
        q.set(0, Action::Up, 1.0 / 3.0);
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let back = QTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back, q);
    }
}
