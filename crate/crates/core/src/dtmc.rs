//! Discrete-time Markov chains over agent locations: construction from a
//! frozen policy, validation, and the explicit `.tra`/`.lab` exchange format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::DtmcError;
use crate::grid::{apply_move, Action, EnvConfig, EpisodeRecord, GridPos, Terminal, N_CELLS};
use crate::learners::QTable;

pub const INIT_LABEL: &str = "init";
pub const GOAL_LABEL: &str = "goal";
pub const COLLISION_LABEL: &str = "collision";

/// States of an extracted chain: the 36 agent cells in row-major order, then
/// one absorbing collision state.
pub const GRID_CHAIN_STATES: usize = N_CELLS + 1;
pub const COLLISION_STATE: usize = N_CELLS;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    n_states: usize,
    initial: usize,
    edges: Vec<Edge>,
    row_start: Vec<usize>,
    labels: BTreeMap<String, BTreeSet<usize>>,
}

impl Dtmc {
    /// Builds a chain without any checks beyond sorting the edges by
    /// `(src, dst)`. Edges with `src >= n_states` are kept in the edge list
    /// but not reachable through [`Dtmc::successors`].
    pub fn from_raw(
        n_states: usize,
        initial: usize,
        mut edges: Vec<Edge>,
        labels: BTreeMap<String, BTreeSet<usize>>,
    ) -> Dtmc {
        edges.sort_by_key(|e| (e.src, e.dst));
        let mut row_start = vec![0; n_states + 1];
        for e in &edges {
            if e.src < n_states {
                row_start[e.src + 1] += 1;
            }
        }
        for i in 0..n_states {
            row_start[i + 1] += row_start[i];
        }
        Dtmc {
            n_states,
            initial,
            edges,
            row_start,
            labels,
        }
    }

    /// Merges duplicate edges, turns states without outgoing edges into
    /// self-loops, and rejects the result if it fails [`validate`].
    pub fn new(
        n_states: usize,
        initial: usize,
        edges: impl IntoIterator<Item = Edge>,
        labels: BTreeMap<String, BTreeSet<usize>>,
    ) -> Result<Dtmc, DtmcError> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in edges {
            *merged.entry((e.src, e.dst)).or_insert(0.0) += e.prob;
        }
        let mut has_row = vec![false; n_states];
        for &(src, _) in merged.keys() {
            if src < n_states {
                has_row[src] = true;
            }
        }
        for (s, has) in has_row.iter().enumerate() {
            if !has {
                merged.insert((s, s), 1.0);
            }
        }
        // merging split mass can overshoot 1 by an ulp
        let edges = merged
            .into_iter()
            .map(|((src, dst), prob)| Edge {
                src,
                dst,
                prob: if prob > 1.0 && prob - 1.0 <= ROW_SUM_TOL { 1.0 } else { prob },
            })
            .collect();
        let d = Dtmc::from_raw(n_states, initial, edges, labels);
        let violations = validate(&d);
        if violations.is_empty() {
            Ok(d)
        } else {
            Err(DtmcError::Invalid(violations))
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn successors(&self, state: usize) -> &[Edge] {
        &self.edges[self.row_start[state]..self.row_start[state + 1]]
    }

    pub fn labels(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&BTreeSet<usize>> {
        self.labels.get(name)
    }

    /// Probability of the edge `src -> dst` (0 when absent).
    pub fn prob(&self, src: usize, dst: usize) -> f64 {
        self.successors(src)
            .binary_search_by_key(&dst, |e| e.dst)
            .map_or(0.0, |i| self.successors(src)[i].prob)
    }

    /// Predecessor lists, one per state.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.n_states];
        for e in &self.edges {
            if e.src < self.n_states && e.dst < self.n_states {
                pred[e.dst].push(e.src);
            }
        }
        pred
    }

    /// States reachable from `from` (inclusive).
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n_states];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(s) = stack.pop() {
            for e in self.successors(s) {
                if !seen[e.dst] {
                    seen[e.dst] = true;
                    stack.push(e.dst);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InitialOutOfRange { initial: usize },
    StateOutOfRange { src: usize, dst: usize },
    ProbabilityRange { src: usize, dst: usize, prob: f64 },
    RowSum { state: usize, sum: f64 },
    Deadlock { state: usize },
    DanglingLabel { label: String, state: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitialOutOfRange { initial } => {
                write!(f, "initial state {initial} out of range")
            }
            Violation::StateOutOfRange { src, dst } => {
                write!(f, "edge {src}->{dst} references a missing state")
            }
            Violation::ProbabilityRange { src, dst, prob } => {
                write!(f, "edge {src}->{dst} has probability {prob} outside (0,1]")
            }
            Violation::RowSum { state, sum } => write!(f, "row of state {state} sums to {sum}"),
            Violation::Deadlock { state } => write!(f, "state {state} has no outgoing edges"),
            Violation::DanglingLabel { label, state } => {
                write!(f, "label `{label}` references missing state {state}")
            }
        }
    }
}

/// Every structural problem of `d`; empty iff the chain is well formed.
pub fn validate(d: &Dtmc) -> Vec<Violation> {
    let mut out = Vec::new();
    if d.initial >= d.n_states {
        out.push(Violation::InitialOutOfRange { initial: d.initial });
    }
    let mut sums = vec![0.0; d.n_states];
    let mut has_row = vec![false; d.n_states];
    for e in &d.edges {
        if e.src >= d.n_states || e.dst >= d.n_states {
            out.push(Violation::StateOutOfRange {
                src: e.src,
                dst: e.dst,
            });
            continue;
        }
        if !(e.prob > 0.0 && e.prob <= 1.0) {
            out.push(Violation::ProbabilityRange {
                src: e.src,
                dst: e.dst,
                prob: e.prob,
            });
        }
        sums[e.src] += e.prob;
        has_row[e.src] = true;
    }
    for s in 0..d.n_states {
        if !has_row[s] {
            out.push(Violation::Deadlock { state: s });
        } else if (sums[s] - 1.0).abs() > ROW_SUM_TOL {
            out.push(Violation::RowSum {
                state: s,
                sum: sums[s],
            });
        }
    }
    for (label, states) in &d.labels {
        for &s in states {
            if s >= d.n_states {
                out.push(Violation::DanglingLabel {
                    label: label.clone(),
                    state: s,
                });
            }
        }
    }
    out
}

fn grid_labels(env: &EnvConfig) -> BTreeMap<String, BTreeSet<usize>> {
    BTreeMap::from([
        (INIT_LABEL.to_string(), BTreeSet::from([env.agent_start.index()])),
        (GOAL_LABEL.to_string(), BTreeSet::from([env.goal.index()])),
        (COLLISION_LABEL.to_string(), BTreeSet::from([COLLISION_STATE])),
    ])
}

/// Location-to-location visit counts gathered from episodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub edges: BTreeMap<(usize, usize), u64>,
    /// Episodes starting in each state.
    pub starts: BTreeMap<usize, u64>,
    /// Episodes whose last state is each state.
    pub ends: BTreeMap<usize, u64>,
}

impl TransitionCounts {
    /// Adds one episode. A collision step leads into the collision state.
    pub fn record(&mut self, episode: &EpisodeRecord) {
        let path: Vec<usize> = episode.agent_path().map(GridPos::index).collect();
        let mut states = path.clone();
        if episode.cause == Terminal::Collision {
            *states.last_mut().expect("non-empty path") = COLLISION_STATE;
        }
        *self.starts.entry(states[0]).or_default() += 1;
        *self.ends.entry(*states.last().unwrap()).or_default() += 1;
        for w in states.windows(2) {
            *self.edges.entry((w[0], w[1])).or_default() += 1;
        }
    }

    pub fn out_count(&self, state: usize) -> u64 {
        self.edges
            .range((state, 0)..=(state, usize::MAX))
            .map(|(_, &c)| c)
            .sum()
    }

    pub fn in_count(&self, state: usize) -> u64 {
        self.edges
            .iter()
            .filter(|((_, dst), _)| *dst == state)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Normalizes counts per source; unvisited states become absorbing and
    /// goal/collision states are forced absorbing.
    pub fn to_dtmc(&self, env: &EnvConfig) -> Result<Dtmc, DtmcError> {
        self.to_dtmc_with(env, ChainSemantics::Absorbing)
    }

    /// Like [`to_dtmc`](Self::to_dtmc), but under `Restart` every episode end
    /// (goal, collision, or the last cell of a timed-out episode) also
    /// counts as a transition back to the start.
    pub fn to_dtmc_with(&self, env: &EnvConfig, semantics: ChainSemantics) -> Result<Dtmc, DtmcError> {
        let absorbing = [env.goal.index(), COLLISION_STATE];
        let init = env.agent_start.index();
        let mut counts = self.edges.clone();
        if semantics == ChainSemantics::Restart {
            for (&end, &c) in &self.ends {
                *counts.entry((end, init)).or_default() += c;
            }
        }
        let mut edges = Vec::new();
        for src in 0..GRID_CHAIN_STATES {
            if semantics == ChainSemantics::Absorbing && absorbing.contains(&src) {
                continue;
            }
            let row = counts.range((src, 0)..=(src, usize::MAX));
            let total: u64 = row.clone().map(|(_, &c)| c).sum();
            if total == 0 {
                continue;
            }
            for (&(_, dst), &c) in row {
                edges.push(Edge {
                    src,
                    dst,
                    prob: c as f64 / total as f64,
                });
            }
        }
        Dtmc::new(GRID_CHAIN_STATES, init, edges, grid_labels(env))
    }
}

/// What happens after an episode ends inside the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainSemantics {
    /// Goal and collision states loop on themselves.
    #[default]
    Absorbing,
    /// Every episode end returns to the start state.
    Restart,
}

impl fmt::Display for ChainSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainSemantics::Absorbing => "absorbing",
            ChainSemantics::Restart => "restart",
        })
    }
}

impl std::str::FromStr for ChainSemantics {
    type Err = crate::error::ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absorbing" => Ok(ChainSemantics::Absorbing),
            "restart" => Ok(ChainSemantics::Restart),
            _ => Err(crate::error::ConfigError::Parse(format!(
                "unknown chain semantics `{s}` (expected absorbing|restart)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtractionMode {
    /// Count transitions over this many evaluation episodes.
    Empirical { episodes: u32 },
    /// Per-cell ε-greedy distribution of the frozen table, adversary-free.
    Analytic { epsilon: f64 },
}

impl Default for ExtractionMode {
    fn default() -> Self {
        ExtractionMode::Empirical { episodes: 100 }
    }
}

impl fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractionMode::Empirical { episodes } => write!(f, "empirical:{episodes}"),
            ExtractionMode::Analytic { epsilon } => write!(f, "analytic:{epsilon}"),
        }
    }
}

impl std::str::FromStr for ExtractionMode {
    type Err = crate::error::ConfigError;

    /// `empirical`, `empirical:<episodes>`, `analytic`, or `analytic:<epsilon>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            crate::error::ConfigError::Parse(format!(
                "bad extraction mode `{s}` (expected empirical[:N] or analytic[:EPS])"
            ))
        };
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let mode = match kind {
            "empirical" => ExtractionMode::Empirical {
                episodes: arg.map_or(Ok(100), str::parse).map_err(|_| bad())?,
            },
            "analytic" => ExtractionMode::Analytic {
                epsilon: arg.map_or(Ok(0.0), str::parse).map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

impl ExtractionMode {
    pub fn validate(&self) -> Result<(), crate::error::ConfigError> {
        match *self {
            ExtractionMode::Empirical { episodes: 0 } => Err(crate::error::ConfigError::Invalid(
                "empirical extraction needs at least one episode".into(),
            )),
            ExtractionMode::Analytic { epsilon } if !(0.0..=1.0).contains(&epsilon) => Err(
                crate::error::ConfigError::Invalid("analytic epsilon must lie in [0,1]".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// A trained agent whose tables no longer change.
pub trait FrozenPolicy {
    /// The agent's main action-value table, indexed by cell.
    fn q_table(&self) -> &QTable;
    /// Plays one evaluation episode against the adversary without learning.
    fn rollout(&mut self, rng: &mut dyn rand::RngCore) -> EpisodeRecord;
}

/// Per-cell ε-greedy chain of a frozen table, ignoring the adversary.
pub fn analytic_chain(
    q: &QTable,
    env: &EnvConfig,
    epsilon: f64,
    semantics: ChainSemantics,
) -> Result<Dtmc, DtmcError> {
    let mut edges = Vec::new();
    if semantics == ChainSemantics::Restart {
        edges.push(Edge {
            src: env.goal.index(),
            dst: env.agent_start.index(),
            prob: 1.0,
        });
    }
    for pos in GridPos::all() {
        if pos == env.goal {
            continue;
        }
        let greedy = q.argmax(pos.index());
        for a in Action::ALL {
            let p = epsilon / Action::COUNT as f64 + if a == greedy { 1.0 - epsilon } else { 0.0 };
            if p > 0.0 {
                edges.push(Edge {
                    src: pos.index(),
                    dst: apply_move(pos, a).index(),
                    prob: p,
                });
            }
        }
    }
    Dtmc::new(
        GRID_CHAIN_STATES,
        env.agent_start.index(),
        edges,
        grid_labels(env),
    )
}

pub fn extract<P: FrozenPolicy + ?Sized, R: Rng>(
    policy: &mut P,
    env: &EnvConfig,
    mode: ExtractionMode,
    semantics: ChainSemantics,
    rng: &mut R,
) -> Result<Dtmc, DtmcError> {
    match mode {
        ExtractionMode::Analytic { epsilon } => {
            analytic_chain(policy.q_table(), env, epsilon, semantics)
        }
        ExtractionMode::Empirical { episodes } => {
            let mut counts = TransitionCounts::default();
            for _ in 0..episodes {
                counts.record(&policy.rollout(rng));
            }
            counts.to_dtmc_with(env, semantics)
        }
    }
}

fn label_order(d: &Dtmc) -> Vec<&str> {
    let fixed = [INIT_LABEL, GOAL_LABEL, COLLISION_LABEL];
    let mut names: Vec<&str> = fixed
        .into_iter()
        .filter(|n| d.labels.contains_key(*n))
        .collect();
    names.extend(
        d.labels
            .keys()
            .map(String::as_str)
            .filter(|n| !fixed.contains(n)),
    );
    names
}

pub fn format_tra(d: &Dtmc) -> String {
    let mut out = format!("{} {}\n", d.n_states, d.edges.len());
    for e in &d.edges {
        out.push_str(&format!("{} {} {:?}\n", e.src, e.dst, e.prob));
    }
    out
}

pub fn format_lab(d: &Dtmc) -> String {
    let names = label_order(d);
    let header: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{i}=\"{n}\""))
        .collect();
    let mut out = header.join(" ");
    out.push('\n');
    let mut per_state: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, name) in names.iter().enumerate() {
        for &s in &d.labels[*name] {
            per_state.entry(s).or_default().push(id);
        }
    }
    for (s, ids) in per_state {
        let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
        out.push_str(&format!("{s}: {}\n", ids.join(" ")));
    }
    out
}

/// Writes `<prefix>.tra` and `<prefix>.lab`; refuses invalid chains.
pub fn export_explicit(d: &Dtmc, prefix: &Path) -> Result<(PathBuf, PathBuf), DtmcError> {
    let violations = validate(d);
    if !violations.is_empty() {
        return Err(DtmcError::Invalid(violations));
    }
    let tra = prefix.with_extension("tra");
    let lab = prefix.with_extension("lab");
    fs::write(&tra, format_tra(d))?;
    fs::write(&lab, format_lab(d))?;
    Ok((tra, lab))
}

fn format_err(file: &str, line: usize, message: impl Into<String>) -> DtmcError {
    DtmcError::Format {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

pub fn parse_tra(text: &str) -> Result<(usize, Vec<Edge>), DtmcError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(".tra", 1, "missing header"))?;
    let nums: Vec<&str> = header.split_whitespace().collect();
    let [n, m] = nums[..] else {
        return Err(format_err(".tra", 1, "header must be `<states> <transitions>`"));
    };
    let n: usize = n.parse().map_err(|_| format_err(".tra", 1, "bad state count"))?;
    let m: usize = m
        .parse()
        .map_err(|_| format_err(".tra", 1, "bad transition count"))?;
    let mut edges = Vec::with_capacity(m);
    for (i, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [src, dst, prob] = fields[..] else {
            return Err(format_err(".tra", i + 1, "expected `src dst prob`"));
        };
        let bad = |what: &str| format_err(".tra", i + 1, format!("bad {what}"));
        edges.push(Edge {
            src: src.parse().map_err(|_| bad("source"))?,
            dst: dst.parse().map_err(|_| bad("target"))?,
            prob: prob.parse().map_err(|_| bad("probability"))?,
        });
    }
    if edges.len() != m {
        return Err(format_err(
            ".tra",
            1,
            format!("header announces {m} transitions, found {}", edges.len()),
        ));
    }
    Ok((n, edges))
}

pub fn parse_lab(text: &str) -> Result<BTreeMap<String, BTreeSet<usize>>, DtmcError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(".lab", 1, "missing label declarations"))?;
    let mut by_id: BTreeMap<usize, String> = BTreeMap::new();
    for decl in header.split_whitespace() {
        let (id, name) = decl
            .split_once('=')
            .ok_or_else(|| format_err(".lab", 1, format!("bad declaration `{decl}`")))?;
        let id: usize = id
            .parse()
            .map_err(|_| format_err(".lab", 1, format!("bad label id in `{decl}`")))?;
        let name = name.trim_matches('"').to_string();
        by_id.insert(id, name);
    }
    let mut labels: BTreeMap<String, BTreeSet<usize>> =
        by_id.values().map(|n| (n.clone(), BTreeSet::new())).collect();
    for (i, line) in lines {
        let (state, ids) = line
            .split_once(':')
            .ok_or_else(|| format_err(".lab", i + 1, "expected `state: ids`"))?;
        let state: usize = state
            .trim()
            .parse()
            .map_err(|_| format_err(".lab", i + 1, "bad state"))?;
        for id in ids.split_whitespace() {
            let id: usize = id
                .parse()
                .map_err(|_| format_err(".lab", i + 1, "bad label id"))?;
            let name = by_id
                .get(&id)
                .ok_or_else(|| format_err(".lab", i + 1, format!("undeclared label id {id}")))?;
            labels.get_mut(name).unwrap().insert(state);
        }
    }
    Ok(labels)
}

/// Rebuilds a chain from explicit-format text. The initial state is the
/// single state carrying the `init` label.
pub fn import_explicit_str(tra: &str, lab: &str) -> Result<Dtmc, DtmcError> {
    let (n, edges) = parse_tra(tra)?;
    let labels = parse_lab(lab)?;
    let init = labels
        .get(INIT_LABEL)
        .ok_or_else(|| format_err(".lab", 1, "no `init` label"))?;
    if init.len() != 1 {
        return Err(format_err(".lab", 1, "`init` must label exactly one state"));
    }
    let initial = *init.iter().next().unwrap();
    let d = Dtmc::from_raw(n, initial, edges, labels);
    let violations = validate(&d);
    if violations.is_empty() {
        Ok(d)
    } else {
        Err(DtmcError::Invalid(violations))
    }
}

pub fn import_explicit(prefix: &Path) -> Result<Dtmc, DtmcError> {
    let tra = fs::read_to_string(prefix.with_extension("tra"))?;
    let lab = fs::read_to_string(prefix.with_extension("lab"))?;
    import_explicit_str(&tra, &lab)
}

/// Single-file archival dump: header, transitions, then one line per label.
pub fn write_dump<W: Write>(d: &Dtmc, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "dtmc states={} transitions={} initial={}",
        d.n_states,
        d.edges.len(),
        d.initial
    )?;
    for e in &d.edges {
        writeln!(out, "{} {} {:?}", e.src, e.dst, e.prob)?;
    }
    for (name, states) in &d.labels {
        let states: Vec<String> = states.iter().map(usize::to_string).collect();
        writeln!(out, "label {name}: {}", states.join(" "))?;
    }
    Ok(())
}
