use std::io;

use thiserror::Error;

use crate::dtmc::Violation;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cell ({row},{col}) is off the 6x6 grid")]
    OffGrid { row: u8, col: u8 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("singular linear system")]
    Singular,
}

#[derive(Debug, Error)]
pub enum DtmcError {
    #[error("chain failed validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum PctlError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("{0}")]
    Semantic(String),
    #[error("unknown atomic proposition `{0}`")]
    UnknownAtom(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Umbrella error for the experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Dtmc(#[from] DtmcError),
    #[error(transparent)]
    Pctl(#[from] PctlError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
