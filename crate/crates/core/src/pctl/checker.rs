//! Numerical PCTL model checking on DTMCs.

use std::collections::VecDeque;

use crate::dtmc::Dtmc;
use crate::error::{PctlError, SolverError};

use super::graph::bottom_sccs;
use super::linear::solve_dense;
use super::{Comparison, PathFormula, ProbBound, StateFormula};

pub const SOLVER_TOL: f64 = 1e-10;
pub const SOLVER_MAX_ITER: u64 = 1_000_000;
/// Probabilities this close to a bound count as equal to it.
pub const BOUND_TOL: f64 = 1e-9;

/// States from which some `target` state is reachable moving only through
/// `through` states (targets included).
fn backward_reach(d: &Dtmc, pred: &[Vec<usize>], target: &[bool], through: &[bool]) -> Vec<bool> {
    let mut seen = target.to_vec();
    let mut queue: VecDeque<usize> = (0..d.n_states()).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &pred[t] {
            if !seen[s] && through[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// `(Prob0, Prob1)` for `φ1 U φ2`: the states where the until holds with
/// probability exactly 0, resp. exactly 1, found by graph search alone.
pub fn prob01(d: &Dtmc, phi1: &[bool], phi2: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let n = d.n_states();
    let pred = d.predecessors();
    let can_reach = backward_reach(d, &pred, phi2, phi1);
    let prob0: Vec<bool> = can_reach.iter().map(|&r| !r).collect();
    let undecided: Vec<bool> = (0..n).map(|s| phi1[s] && !phi2[s]).collect();
    let can_fail = backward_reach(d, &pred, &prob0, &undecided);
    let prob1 = can_fail.iter().map(|&r| !r).collect();
    (prob0, prob1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UntilSolution {
    pub values: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
}

/// `P(φ1 U φ2)` per state: Prob0/Prob1 states are fixed exactly, the rest
/// solved by Gauss–Seidel until a sweep changes no value by `tol` or more.
pub fn until_prob(
    d: &Dtmc,
    phi1: &[bool],
    phi2: &[bool],
    tol: f64,
    max_iter: u64,
) -> Result<UntilSolution, SolverError> {
    let (prob0, prob1) = prob01(d, phi1, phi2);
    let n = d.n_states();
    let mut x: Vec<f64> = (0..n).map(|s| if prob1[s] { 1.0 } else { 0.0 }).collect();
    let maybe: Vec<usize> = (0..n).filter(|&s| !prob0[s] && !prob1[s]).collect();
    if maybe.is_empty() {
        return Ok(UntilSolution {
            values: x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        residual = 0.0;
        for &s in &maybe {
            let mut diag = 0.0;
            let mut acc = 0.0;
            for e in d.successors(s) {
                if e.dst == s {
                    diag += e.prob;
                } else {
                    acc += e.prob * x[e.dst];
                }
            }
            let new = acc / (1.0 - diag);
            residual = residual.max((new - x[s]).abs());
            x[s] = new;
        }
        if residual < tol {
            return Ok(UntilSolution {
                values: x,
                iterations: it,
                residual,
            });
        }
    }
    Err(SolverError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Same quantity as [`until_prob`] via a dense direct solve of
/// `(I − A) x = b` on the undecided states. Intended for small chains.
pub fn until_prob_direct(d: &Dtmc, phi1: &[bool], phi2: &[bool]) -> Result<Vec<f64>, SolverError> {
    let (prob0, prob1) = prob01(d, phi1, phi2);
    let n = d.n_states();
    let mut x: Vec<f64> = (0..n).map(|s| if prob1[s] { 1.0 } else { 0.0 }).collect();
    let maybe: Vec<usize> = (0..n).filter(|&s| !prob0[s] && !prob1[s]).collect();
    let m = maybe.len();
    if m == 0 {
        return Ok(x);
    }
    let mut slot = vec![usize::MAX; n];
    for (i, &s) in maybe.iter().enumerate() {
        slot[s] = i;
    }
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (i, &s) in maybe.iter().enumerate() {
        a[i * m + i] += 1.0;
        for e in d.successors(s) {
            if prob1[e.dst] {
                b[i] += e.prob;
            } else if slot[e.dst] != usize::MAX {
                a[i * m + slot[e.dst]] -= e.prob;
            }
        }
    }
    let sol = solve_dense(a, b)?;
    for (i, &s) in maybe.iter().enumerate() {
        x[s] = sol[i];
    }
    Ok(x)
}

/// `P(φ1 U≤k φ2)` per state by `k` backward matrix–vector steps.
pub fn bounded_until_prob(d: &Dtmc, phi1: &[bool], phi2: &[bool], k: u64) -> Vec<f64> {
    let n = d.n_states();
    let mut x: Vec<f64> = phi2.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut next = vec![0.0; n];
    for _ in 0..k {
        for s in 0..n {
            next[s] = if phi2[s] {
                1.0
            } else if phi1[s] {
                d.successors(s).iter().map(|e| e.prob * x[e.dst]).sum()
            } else {
                0.0
            };
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

/// `P(X φ)` per state.
pub fn next_prob(d: &Dtmc, phi: &[bool]) -> Vec<f64> {
    (0..d.n_states())
        .map(|s| {
            d.successors(s)
                .iter()
                .filter(|e| phi[e.dst])
                .map(|e| e.prob)
                .sum()
        })
        .collect()
}

/// BSCC states split into those inside a component holding a target state
/// and those inside one that does not.
fn classify_bsccs(d: &Dtmc, target: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let n = d.n_states();
    let mut good = vec![false; n];
    let mut bad = vec![false; n];
    for comp in bottom_sccs(d) {
        let hit = comp.iter().any(|&s| target[s]);
        for s in comp {
            if hit {
                good[s] = true;
            } else {
                bad[s] = true;
            }
        }
    }
    (good, bad)
}

/// Per state: does `G F target` hold almost surely? True iff every bottom
/// component reachable from the state contains a target state.
pub fn qualitative_gf(d: &Dtmc, target: &[bool]) -> Vec<bool> {
    let (_, bad) = classify_bsccs(d, target);
    let all = vec![true; d.n_states()];
    let reaches_bad = backward_reach(d, &d.predecessors(), &bad, &all);
    reaches_bad.iter().map(|&r| !r).collect()
}

/// `P(G F target)`: the probability of ending in a bottom component that
/// contains a target state.
fn gf_prob(d: &Dtmc, target: &[bool]) -> Result<UntilSolution, SolverError> {
    let (good, _) = classify_bsccs(d, target);
    let all = vec![true; d.n_states()];
    until_prob(d, &all, &good, SOLVER_TOL, SOLVER_MAX_ITER)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateValues {
    Bool(Vec<bool>),
    Prob(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub iterations: u64,
    pub residual: f64,
}

impl Diagnostics {
    fn absorb(&mut self, sol: &UntilSolution) {
        self.iterations += sol.iterations;
        self.residual = self.residual.max(sol.residual);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Booleans for bounded or boolean formulas, probabilities for `P=?`.
    pub values: StateValues,
    /// For a top-level probability operator, the probabilities it compared.
    pub probabilities: Option<Vec<f64>>,
    pub initial: usize,
    pub diagnostics: Diagnostics,
}

impl CheckResult {
    pub fn initial_holds(&self) -> Option<bool> {
        match &self.values {
            StateValues::Bool(v) => Some(v[self.initial]),
            StateValues::Prob(_) => None,
        }
    }

    pub fn initial_probability(&self) -> Option<f64> {
        self.probabilities.as_ref().map(|p| p[self.initial])
    }
}

fn compare(p: f64, cmp: Comparison, bound: f64) -> bool {
    let p = if (p - bound).abs() < BOUND_TOL { bound } else { p };
    match cmp {
        Comparison::Less => p < bound,
        Comparison::LessEq => p <= bound,
        Comparison::GreaterEq => p >= bound,
        Comparison::Greater => p > bound,
    }
}

fn path_probabilities(
    d: &Dtmc,
    path: &PathFormula,
    diag: &mut Diagnostics,
) -> Result<Vec<f64>, PctlError> {
    Ok(match path {
        PathFormula::Next(phi) => next_prob(d, &sat_inner(d, phi, diag)?),
        PathFormula::BoundedUntil(l, r, k) => {
            bounded_until_prob(d, &sat_inner(d, l, diag)?, &sat_inner(d, r, diag)?, *k)
        }
        PathFormula::Until(l, r) => {
            let sol = until_prob(
                d,
                &sat_inner(d, l, diag)?,
                &sat_inner(d, r, diag)?,
                SOLVER_TOL,
                SOLVER_MAX_ITER,
            )?;
            diag.absorb(&sol);
            sol.values
        }
        PathFormula::GloballyEventually(phi) => {
            let sol = gf_prob(d, &sat_inner(d, phi, diag)?)?;
            diag.absorb(&sol);
            sol.values
        }
    })
}

fn prob_operator(
    d: &Dtmc,
    cmp: Comparison,
    bound: f64,
    path: &PathFormula,
    diag: &mut Diagnostics,
) -> Result<(Vec<bool>, Vec<f64>), PctlError> {
    let probs = path_probabilities(d, path, diag)?;
    let holds = match path {
        // almost-sure recurrence is decided on the graph, not numerically
        PathFormula::GloballyEventually(phi) if cmp == Comparison::GreaterEq && bound == 1.0 => {
            qualitative_gf(d, &sat_inner(d, phi, diag)?)
        }
        _ => probs.iter().map(|&p| compare(p, cmp, bound)).collect(),
    };
    Ok((holds, probs))
}

fn sat_inner(d: &Dtmc, f: &StateFormula, diag: &mut Diagnostics) -> Result<Vec<bool>, PctlError> {
    let n = d.n_states();
    Ok(match f {
        StateFormula::True => vec![true; n],
        StateFormula::Atom(name) => {
            let states = d
                .label(name)
                .ok_or_else(|| PctlError::UnknownAtom(name.clone()))?;
            let mut mask = vec![false; n];
            for &s in states {
                mask[s] = true;
            }
            mask
        }
        StateFormula::Not(a) => sat_inner(d, a, diag)?.into_iter().map(|b| !b).collect(),
        StateFormula::And(a, b) => {
            let (a, b) = (sat_inner(d, a, diag)?, sat_inner(d, b, diag)?);
            a.iter().zip(b).map(|(&x, y)| x && y).collect()
        }
        StateFormula::Or(a, b) => {
            let (a, b) = (sat_inner(d, a, diag)?, sat_inner(d, b, diag)?);
            a.iter().zip(b).map(|(&x, y)| x || y).collect()
        }
        StateFormula::Prob(ProbBound::Bound(cmp, p), path) => {
            prob_operator(d, *cmp, *p, path, diag)?.0
        }
        StateFormula::Prob(ProbBound::Query, _) => {
            return Err(PctlError::Semantic(
                "`P=?` cannot be used as a nested state formula".into(),
            ))
        }
    })
}

/// States satisfying a (non-query) state formula.
pub fn sat(d: &Dtmc, f: &StateFormula) -> Result<Vec<bool>, PctlError> {
    sat_inner(d, f, &mut Diagnostics::default())
}

pub fn check(d: &Dtmc, f: &StateFormula) -> Result<CheckResult, PctlError> {
    let mut diagnostics = Diagnostics::default();
    let (values, probabilities) = match f {
        StateFormula::Prob(ProbBound::Query, path) => {
            let p = path_probabilities(d, path, &mut diagnostics)?;
            (StateValues::Prob(p.clone()), Some(p))
        }
        StateFormula::Prob(ProbBound::Bound(cmp, bound), path) => {
            let (holds, p) = prob_operator(d, *cmp, *bound, path, &mut diagnostics)?;
            (StateValues::Bool(holds), Some(p))
        }
        other => (StateValues::Bool(sat_inner(d, other, &mut diagnostics)?), None),
    };
    Ok(CheckResult {
        values,
        probabilities,
        initial: d.initial(),
        diagnostics,
    })
}
