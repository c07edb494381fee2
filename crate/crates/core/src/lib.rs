//! Adversarial grid-world Q-learning with reward-shaping defenses, DTMC
//! extraction from trained policies, and PCTL model checking.

pub mod defenses;
pub mod dtmc;
pub mod error;
pub mod grid;
pub mod harness;
pub mod learners;
pub mod pctl;

pub use error::Error;
