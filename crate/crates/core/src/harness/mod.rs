//! Seeded multi-run experiments: configuration, training, metrics, and the
//! train → extract → verify pipeline.

mod config;
mod experiment;
mod metrics;
mod simulation;

pub use config::{scenario, ExperimentConfig, KEYS};
pub use experiment::{
    check_runs, parse_properties, run_experiment, verify_pipeline, Experiment, PropertyOutcome,
    PropertySummary, Verdict, VerificationReport, DEFAULT_PROPERTIES,
};
pub use metrics::{collision_rate, cumulative, mean_std, Metrics, COLLISION_WINDOW};
pub use simulation::{
    run_seed, train_run, Adversary, Agent, EpisodeSummary, FrozenWorld, RunResult, SelectionRule,
    World,
};
