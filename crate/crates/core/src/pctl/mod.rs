//! PCTL over DTMCs: formula syntax, parsing, and numerical model checking.

mod checker;
mod graph;
mod linear;
mod parser;

use std::fmt;

pub use checker::{
    bounded_until_prob, check, next_prob, prob01, qualitative_gf, sat, until_prob,
    until_prob_direct, CheckResult, Diagnostics, StateValues, UntilSolution, SOLVER_MAX_ITER,
    SOLVER_TOL,
};
pub use graph::{bottom_sccs, strongly_connected_components};
pub use linear::solve_dense;
pub use parser::parse;

/// Comparison in a probability bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Less,
    LessEq,
    GreaterEq,
    Greater,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Less => "<",
            Comparison::LessEq => "<=",
            Comparison::GreaterEq => ">=",
            Comparison::Greater => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbBound {
    /// `P=?`
    Query,
    Bound(Comparison, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    Atom(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Prob(ProbBound, Box<PathFormula>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    BoundedUntil(StateFormula, StateFormula, u64),
    Until(StateFormula, StateFormula),
    /// `G F Φ`; only valid directly under `P>=1` or `P=?`.
    GloballyEventually(StateFormula),
}

impl StateFormula {
    pub fn atom(name: &str) -> StateFormula {
        StateFormula::Atom(name.to_string())
    }

    pub fn is_query(&self) -> bool {
        matches!(self, StateFormula::Prob(ProbBound::Query, _))
    }

    fn is_primary(&self) -> bool {
        matches!(
            self,
            StateFormula::True | StateFormula::Atom(_) | StateFormula::Prob(..)
        )
    }
}

fn fmt_operand(f: &mut fmt::Formatter<'_>, phi: &StateFormula) -> fmt::Result {
    if phi.is_primary() {
        write!(f, "{phi}")
    } else {
        write!(f, "({phi})")
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::Atom(a) => f.write_str(a),
            StateFormula::Not(inner) => {
                f.write_str("!")?;
                fmt_operand(f, inner)
            }
            StateFormula::And(l, r) => {
                fmt_operand(f, l)?;
                f.write_str(" & ")?;
                fmt_operand(f, r)
            }
            StateFormula::Or(l, r) => {
                fmt_operand(f, l)?;
                f.write_str(" | ")?;
                fmt_operand(f, r)
            }
            StateFormula::Prob(bound, path) => {
                match bound {
                    ProbBound::Query => f.write_str("P=?")?,
                    ProbBound::Bound(c, p) => write!(f, "P{}{}", c.symbol(), p)?,
                }
                write!(f, " [ {path} ]")
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(phi) => {
                f.write_str("X ")?;
                fmt_operand(f, phi)
            }
            PathFormula::Until(StateFormula::True, rhs) => {
                f.write_str("F ")?;
                fmt_operand(f, rhs)
            }
            PathFormula::BoundedUntil(StateFormula::True, rhs, k) => {
                write!(f, "F<={k} ")?;
                fmt_operand(f, rhs)
            }
            PathFormula::Until(lhs, rhs) => {
                fmt_operand(f, lhs)?;
                f.write_str(" U ")?;
                fmt_operand(f, rhs)
            }
            PathFormula::BoundedUntil(lhs, rhs, k) => {
                fmt_operand(f, lhs)?;
                write!(f, " U<={k} ")?;
                fmt_operand(f, rhs)
            }
            PathFormula::GloballyEventually(phi) => {
                f.write_str("G F ")?;
                fmt_operand(f, phi)
            }
        }
    }
}
