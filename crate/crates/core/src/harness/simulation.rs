//! One training run: the agent and adversary learners, the episode loop,
//! and the frozen evaluation policy used for chain extraction.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::defenses::{
    select_modified, select_with_observations, CollisionStats, DefenseConfig, DefenseMechanism,
    ObservationTable, ObservationUpdate, Shaper,
};
use crate::dtmc::{extract, Dtmc, FrozenPolicy};
use crate::error::Error;
use crate::grid::{
    observe, reset, step, Action, EnvConfig, EpisodeRecord, GridPos, StepRecord, Terminal,
    N_CELLS,
};
use crate::learners::{
    adversary_state_key, patrol_position, q_update, select_epsilon_greedy, AdversaryKind,
    LearnerConfig, QTable,
};

use super::config::ExperimentConfig;

const AGENT_STREAM: u64 = 0;
const ADVERSARY_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

/// How the agent turns its tables into an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    EpsilonGreedy,
    WithObservations,
    Modified,
}

impl SelectionRule {
    pub fn for_config(defense: DefenseMechanism, observations: bool) -> SelectionRule {
        match defense {
            DefenseMechanism::ModifiedQ => SelectionRule::Modified,
            DefenseMechanism::QWithObservations => SelectionRule::WithObservations,
            _ if observations => SelectionRule::WithObservations,
            _ => SelectionRule::EpsilonGreedy,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub q: QTable,
    pub q_obs: ObservationTable,
    pub stats: CollisionStats,
    pub rule: SelectionRule,
    shaper: Option<Shaper>,
    learner: LearnerConfig,
    penalty: f64,
}

impl Agent {
    pub fn new(learner: LearnerConfig, defense: &DefenseConfig, observations: bool, goal: GridPos) -> Self {
        let shaper = defense
            .mechanism
            .potential()
            .map(|kind| Shaper::new(kind, defense.potential_sign, goal, learner.gamma));
        Agent {
            q: QTable::new(N_CELLS),
            q_obs: ObservationTable::new(N_CELLS),
            stats: CollisionStats::default(),
            rule: SelectionRule::for_config(defense.mechanism, observations),
            shaper,
            learner,
            penalty: defense.adv_penalty,
        }
    }

    fn begin_episode(&mut self, start: GridPos) -> f64 {
        match &mut self.shaper {
            Some(s) => s.begin_episode(start, &self.stats),
            None => 0.0,
        }
    }

    fn current_potential(&self) -> f64 {
        self.shaper.as_ref().map_or(0.0, Shaper::current_potential)
    }

    fn select<R: Rng + ?Sized>(&mut self, me: GridPos, adversary: GridPos, epsilon: f64, rng: &mut R, learn: bool) -> Action {
        let obs = observe(me, adversary);
        match self.rule {
            SelectionRule::EpsilonGreedy => select_epsilon_greedy(&self.q, me.index(), epsilon, rng),
            SelectionRule::WithObservations => select_with_observations(
                &self.q,
                &mut self.q_obs,
                &obs,
                epsilon,
                rng,
                ObservationUpdate {
                    alpha: self.learner.alpha,
                    gamma: self.learner.gamma,
                    penalty: self.penalty,
                    learn,
                },
            ),
            SelectionRule::Modified => select_modified(&self.q, &obs, epsilon, rng),
        }
    }

    /// Shapes the raw reward for arriving at `next`, then (when learning)
    /// updates the collision counters and the main table.
    fn observe_step(
        &mut self,
        state: GridPos,
        action: Action,
        raw: f64,
        next: GridPos,
        terminal: Terminal,
        learn: bool,
    ) -> f64 {
        let shaped = match &mut self.shaper {
            Some(s) => s.shape(raw, next, &self.stats),
            None => raw,
        };
        if learn {
            self.stats.record(next, terminal == Terminal::Collision);
            let bootstrap = (!terminal.is_absorbing()).then_some(next.index());
            q_update(
                &mut self.q,
                state.index(),
                action,
                shaped,
                bootstrap,
                self.learner.alpha,
                self.learner.gamma,
            );
        }
        shaped
    }
}

#[derive(Debug, Clone)]
pub enum Adversary {
    Patrol(AdversaryKind),
    Learner {
        kind: AdversaryKind,
        q: QTable,
        learner: LearnerConfig,
    },
}

impl Adversary {
    pub fn new(kind: AdversaryKind, learner: LearnerConfig) -> Self {
        if kind.is_learning() {
            Adversary::Learner {
                kind,
                q: QTable::new(kind.n_states()),
                learner,
            }
        } else {
            Adversary::Patrol(kind)
        }
    }

    pub fn kind(&self) -> AdversaryKind {
        match self {
            Adversary::Patrol(k) => *k,
            Adversary::Learner { kind, .. } => *kind,
        }
    }

    pub fn table(&self) -> Option<&QTable> {
        match self {
            Adversary::Patrol(_) => None,
            Adversary::Learner { q, .. } => Some(q),
        }
    }

    fn key(kind: AdversaryKind, me: GridPos, agent: GridPos) -> usize {
        adversary_state_key(kind, me, &observe(me, agent))
    }

    fn select<R: Rng + ?Sized>(&self, me: GridPos, agent: GridPos, tick: u32, epsilon: f64, rng: &mut R) -> Action {
        match self {
            Adversary::Patrol(kind) => {
                let here = patrol_position(*kind, tick as u64).expect("patrol route");
                let there = patrol_position(*kind, tick as u64 + 1).expect("patrol route");
                debug_assert_eq!(here, me);
                Action::between(here, there).expect("patrol cells are adjacent")
            }
            Adversary::Learner { kind, q, .. } => {
                select_epsilon_greedy(q, Self::key(*kind, me, agent), epsilon, rng)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn learn(
        &mut self,
        me: GridPos,
        agent: GridPos,
        action: Action,
        reward: f64,
        next_me: GridPos,
        next_agent: GridPos,
        terminal: Terminal,
    ) {
        if let Adversary::Learner { kind, q, learner } = self {
            let s = Self::key(*kind, me, agent);
            let next = (!terminal.is_absorbing()).then(|| Self::key(*kind, next_me, next_agent));
            q_update(q, s, action, reward, next, learner.alpha, learner.gamma);
        }
    }
}

/// Agent, adversary, and the static layout they play in.
#[derive(Debug, Clone)]
pub struct World {
    pub env: EnvConfig,
    pub agent: Agent,
    pub adversary: Adversary,
}

impl World {
    pub fn new(config: &ExperimentConfig, seed: u64) -> World {
        let env = config.env();
        let learner = LearnerConfig {
            seed,
            ..config.learner
        };
        World {
            env,
            agent: Agent::new(learner, &config.defense, config.agent_observations, env.goal),
            adversary: Adversary::new(config.adversary, learner),
        }
    }

    /// Plays one episode. With `learn` false no table or counter changes.
    pub fn play_episode<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        agent_epsilon: f64,
        adversary_epsilon: f64,
        agent_rng: &mut R1,
        adversary_rng: &mut R2,
        learn: bool,
    ) -> EpisodeRecord {
        let (mut me, mut adv) = reset(&self.env).expect("validated layout");
        let initial_potential = self.agent.begin_episode(me);
        let mut steps = Vec::new();
        let mut cause = Terminal::Timeout;
        for t in 0..self.env.timeout_steps {
            let a = self.agent.select(me, adv, agent_epsilon, agent_rng, learn);
            let b = self.adversary.select(adv, me, t, adversary_epsilon, adversary_rng);
            let out = step(&self.env, me, adv, a, b, t);
            let shaped = self.agent.observe_step(me, a, out.agent_reward, out.next_agent, out.terminal, learn);
            if learn {
                self.adversary.learn(
                    adv,
                    me,
                    b,
                    out.adversary_reward,
                    out.next_adversary,
                    out.next_agent,
                    out.terminal,
                );
            }
            steps.push(StepRecord {
                agent: me,
                adversary: adv,
                agent_action: a,
                raw_reward: out.agent_reward,
                shaped_reward: shaped,
            });
            me = out.next_agent;
            adv = out.next_adversary;
            if out.terminal.is_terminal() {
                cause = out.terminal;
                break;
            }
        }
        EpisodeRecord {
            steps,
            final_agent: me,
            final_adversary: adv,
            cause,
            initial_potential,
            final_potential: self.agent.current_potential(),
        }
    }
}

/// Per-episode training outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub cause: Terminal,
    pub steps: u32,
    pub agent_return: f64,
    pub shaped_return: f64,
    pub adversary_return: f64,
}

impl EpisodeSummary {
    pub fn collided(&self) -> bool {
        self.cause == Terminal::Collision
    }

    fn of(rec: &EpisodeRecord) -> Self {
        EpisodeSummary {
            cause: rec.cause,
            steps: rec.len() as u32,
            agent_return: rec.raw_return(),
            shaped_return: rec.steps.iter().map(|s| s.shaped_reward).sum(),
            adversary_return: if rec.collided() { 100.0 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    pub episodes: Vec<EpisodeSummary>,
    pub world: World,
    pub final_agent_epsilon: f64,
    pub final_adversary_epsilon: f64,
    pub dtmc: Option<Dtmc>,
}

/// Counter-mode derivation of per-run seeds: SplitMix64 applied to
/// `master + (run + 1)·φ`, a bijection, so distinct runs get distinct seeds.
pub fn run_seed(master: u64, run: usize) -> u64 {
    let mut z = master.wrapping_add((run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Trains one run and, when requested, extracts its chain.
pub fn train_run(config: &ExperimentConfig, run_index: usize, extract_chain: bool) -> Result<RunResult, Error> {
    let seed = run_seed(config.master_seed, run_index);
    let mut world = World::new(config, seed);
    let mut agent_rng = stream(seed, AGENT_STREAM);
    let mut adversary_rng = stream(seed, ADVERSARY_STREAM);
    let schedule = config.learner.epsilon;
    let mut episodes = Vec::with_capacity(config.episodes as usize);
    for ep in 0..config.episodes {
        let eps = schedule.at(ep);
        let rec = world.play_episode(eps, eps, &mut agent_rng, &mut adversary_rng, true);
        episodes.push(EpisodeSummary::of(&rec));
    }
    let final_eps = schedule.at(config.episodes);
    let dtmc = if extract_chain {
        let mut frozen = FrozenWorld {
            world: &mut world,
            agent_epsilon: final_eps,
            adversary_epsilon: final_eps,
            adversary_rng: stream(seed, ADVERSARY_STREAM + 16),
        };
        let env = frozen.world.env;
        let mut eval_rng = stream(seed, EVAL_STREAM);
        Some(extract(
            &mut frozen,
            &env,
            config.extract_mode,
            config.chain_semantics,
            &mut eval_rng,
        )?)
    } else {
        None
    };
    Ok(RunResult {
        run_index,
        seed,
        episodes,
        world,
        final_agent_epsilon: final_eps,
        final_adversary_epsilon: final_eps,
        dtmc,
    })
}

/// A trained world replayed without learning, at the final exploration rate.
pub struct FrozenWorld<'a> {
    pub world: &'a mut World,
    pub agent_epsilon: f64,
    pub adversary_epsilon: f64,
    pub adversary_rng: ChaCha8Rng,
}

impl FrozenPolicy for FrozenWorld<'_> {
    fn q_table(&self) -> &QTable {
        &self.world.agent.q
    }

    fn rollout(&mut self, rng: &mut dyn RngCore) -> EpisodeRecord {
        self.world.play_episode(
            self.agent_epsilon,
            self.adversary_epsilon,
            rng,
            &mut self.adversary_rng,
            false,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defenses::PotentialKind;

    fn small(adversary: AdversaryKind, defense: DefenseMechanism) -> ExperimentConfig {
        ExperimentConfig {
            runs: 1,
            episodes: 200,
            adversary,
            defense: DefenseConfig::new(defense),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn seeds_distinct_and_stable() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| run_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(run_seed(42, 3), run_seed(42, 3));
        assert_ne!(run_seed(42, 3), run_seed(43, 3));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small(
            AdversaryKind::Learning { with_observations: false },
            DefenseMechanism::None,
        );
        let a = train_run(&cfg, 0, false).unwrap();
        let b = train_run(&cfg, 0, false).unwrap();
        assert_eq!(a.world.agent.q, b.world.agent.q);
        assert_eq!(a.world.adversary.table(), b.world.adversary.table());
        assert_eq!(a.episodes, b.episodes);
    }

    #[test]
    fn episodes_respect_timeout_and_end_properly() {
        let cfg = small(AdversaryKind::Patrol3, DefenseMechanism::ModifiedQ);
        let r = train_run(&cfg, 0, false).unwrap();
        for e in &r.episodes {
            assert!(e.steps >= 1 && e.steps <= 100);
            assert!(e.cause.is_terminal());
            if e.cause == Terminal::Timeout {
                assert_eq!(e.steps, 100);
            }
        }
        assert!(r.world.agent.q.is_finite());
    }

    #[test]
    fn observation_table_untouched_without_encounters() {
        // patroller never leaves the goal corner; agent with ε = 1 for a few
        // short episodes cannot get adjacent if the timeout is tiny
        let mut cfg = small(AdversaryKind::Patrol3, DefenseMechanism::QWithObservations);
        cfg.timeout_steps = 2;
        let r = train_run(&cfg, 0, false).unwrap();
        assert_eq!(r.world.agent.q_obs.raw(), &QTable::new(N_CELLS));
    }

    #[test]
    fn shaped_returns_telescope_on_recorded_episodes() {
        let cfg = small(
            AdversaryKind::Learning { with_observations: false },
            DefenseMechanism::Pbrs(PotentialKind::ManhattanToGoal),
        );
        let seed = 9;
        let mut world = World::new(&cfg, seed);
        let mut r1 = stream(seed, 0);
        let mut r2 = stream(seed, 1);
        let gamma = cfg.learner.gamma;
        for ep in 0..300 {
            let eps = cfg.learner.epsilon.at(ep);
            let rec = world.play_episode(eps, eps, &mut r1, &mut r2, true);
            let discounted: f64 = rec
                .steps
                .iter()
                .enumerate()
                .map(|(t, s)| gamma.powi(t as i32) * (s.shaped_reward - s.raw_reward))
                .sum();
            let expect = gamma.powi(rec.len() as i32) * rec.final_potential - rec.initial_potential;
            assert!((discounted - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn patrol_adversary_follows_route() {
        let cfg = small(AdversaryKind::Patrol5, DefenseMechanism::None);
        let mut world = World::new(&cfg, 1);
        let mut r1 = stream(1, 0);
        let mut r2 = stream(1, 1);
        let rec = world.play_episode(1.0, 1.0, &mut r1, &mut r2, true);
        for (t, s) in rec.steps.iter().enumerate() {
            assert_eq!(Some(s.adversary), patrol_position(AdversaryKind::Patrol5, t as u64));
        }
    }

    #[test]
    fn frozen_rollouts_do_not_learn() {
        let cfg = small(
            AdversaryKind::Learning { with_observations: true },
            DefenseMechanism::QWithObservations,
        );
        let mut r = train_run(&cfg, 0, false).unwrap();
        let before = r.world.clone();
        let mut frozen = FrozenWorld {
            world: &mut r.world,
            agent_epsilon: 0.3,
            adversary_epsilon: 0.3,
            adversary_rng: stream(5, 7),
        };
        let mut rng = stream(5, 8);
        for _ in 0..20 {
            frozen.rollout(&mut rng);
        }
        assert_eq!(r.world.agent.q, before.agent.q);
        assert_eq!(r.world.agent.q_obs, before.agent.q_obs);
        assert_eq!(r.world.agent.stats, before.agent.stats);
        assert_eq!(r.world.adversary.table(), before.adversary.table());
    }
}
