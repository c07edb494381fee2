use std::path::Path;

use serde::Deserialize;

use crate::defenses::{DefenseConfig, DefenseMechanism, PotentialKind, PotentialSign};
use crate::dtmc::{ChainSemantics, ExtractionMode};
use crate::error::ConfigError;
use crate::grid::{EnvConfig, DEFAULT_TIMEOUT};
use crate::learners::{AdversaryKind, LearnerConfig};

/// Everything that determines an experiment's output. `jobs` only sets the
/// worker count and never changes results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub runs: u32,
    pub episodes: u32,
    pub timeout_steps: u32,
    pub adversary: AdversaryKind,
    pub agent_observations: bool,
    pub defense: DefenseConfig,
    pub learner: LearnerConfig,
    pub master_seed: u64,
    pub extract_mode: ExtractionMode,
    pub chain_semantics: ChainSemantics,
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            runs: 50,
            episodes: 2000,
            timeout_steps: DEFAULT_TIMEOUT,
            adversary: AdversaryKind::Learning {
                with_observations: false,
            },
            agent_observations: false,
            defense: DefenseConfig::default(),
            learner: LearnerConfig::default(),
            master_seed: 0,
            extract_mode: ExtractionMode::default(),
            chain_semantics: ChainSemantics::default(),
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            adversary_start: self.adversary.start(),
            timeout_steps: self.timeout_steps,
            ..EnvConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be at least 1".into()));
        }
        if self.episodes == 0 {
            return Err(ConfigError::Invalid("episodes must be at least 1".into()));
        }
        self.env().validate()?;
        self.learner.validate()?;
        self.defense.validate()?;
        self.extract_mode.validate()
    }

    /// Applies the keys of a TOML document on top of `self`.
    pub fn merge_toml(&mut self, text: &str) -> Result<(), ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        if let Some(key) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        let file: FileConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        file.apply(self)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig, crate::Error> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        cfg.merge_toml(&text)?;
        Ok(cfg)
    }
}

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "runs",
    "episodes",
    "timeout_steps",
    "adversary",
    "observations",
    "defense",
    "potential_sign",
    "adv_penalty",
    "alpha",
    "gamma",
    "epsilon_start",
    "epsilon_decay",
    "epsilon_floor",
    "seed",
    "extract_mode",
    "chain_semantics",
    "jobs",
];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    runs: Option<u32>,
    episodes: Option<u32>,
    timeout_steps: Option<u32>,
    adversary: Option<String>,
    observations: Option<bool>,
    defense: Option<String>,
    potential_sign: Option<String>,
    adv_penalty: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    epsilon_start: Option<f64>,
    epsilon_decay: Option<f64>,
    epsilon_floor: Option<f64>,
    seed: Option<u64>,
    extract_mode: Option<String>,
    chain_semantics: Option<String>,
    jobs: Option<usize>,
}

impl FileConfig {
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        macro_rules! set {
            ($field:ident => $target:expr) => {
                if let Some(v) = self.$field {
                    $target = v;
                }
            };
        }
        set!(runs => cfg.runs);
        set!(episodes => cfg.episodes);
        set!(timeout_steps => cfg.timeout_steps);
        set!(observations => cfg.agent_observations);
        set!(adv_penalty => cfg.defense.adv_penalty);
        set!(alpha => cfg.learner.alpha);
        set!(gamma => cfg.learner.gamma);
        set!(epsilon_start => cfg.learner.epsilon.initial);
        set!(epsilon_decay => cfg.learner.epsilon.decay);
        set!(epsilon_floor => cfg.learner.epsilon.floor);
        set!(seed => cfg.master_seed);
        set!(jobs => cfg.jobs);
        if let Some(s) = self.adversary {
            cfg.adversary = s.parse()?;
        }
        if let Some(s) = self.defense {
            cfg.defense.mechanism = s.parse()?;
        }
        if let Some(s) = self.potential_sign {
            cfg.defense.potential_sign = s.parse()?;
        }
        if let Some(s) = self.extract_mode {
            cfg.extract_mode = s.parse()?;
        }
        if let Some(s) = self.chain_semantics {
            cfg.chain_semantics = s.parse()?;
        }
        Ok(())
    }
}

/// The four verification scenarios: a learning adversary against an
/// observing agent, differing only in the defense.
pub fn scenario(n: u8) -> Result<ExperimentConfig, ConfigError> {
    let defense = match n {
        1 => DefenseMechanism::None,
        2 => DefenseMechanism::Pbrs(PotentialKind::ManhattanToGoal),
        3 => DefenseMechanism::Pbrs(PotentialKind::CollisionFreeProb),
        4 => DefenseMechanism::ModifiedQ,
        _ => {
            return Err(ConfigError::Invalid(format!(
                "scenario must be 1, 2, 3 or 4 (got {n})"
            )))
        }
    };
    Ok(ExperimentConfig {
        adversary: AdversaryKind::Learning {
            with_observations: false,
        },
        agent_observations: true,
        defense: DefenseConfig {
            mechanism: defense,
            adv_penalty: -100.0,
            potential_sign: PotentialSign::default(),
        },
        ..ExperimentConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.runs, c.episodes, c.timeout_steps), (50, 2000, 100));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn scenarios_differ_only_in_defense() {
        let base = scenario(1).unwrap();
        assert_eq!(base.defense.mechanism, DefenseMechanism::None);
        assert_eq!(
            scenario(2).unwrap().defense.mechanism,
            DefenseMechanism::Pbrs(PotentialKind::ManhattanToGoal)
        );
        assert_eq!(scenario(4).unwrap().defense.mechanism, DefenseMechanism::ModifiedQ);
        for n in 2..=4 {
            let mut s = scenario(n).unwrap();
            s.defense = base.defense;
            assert_eq!(s, base);
        }
        assert!(scenario(0).is_err());
        assert!(scenario(5).is_err());
    }

    #[test]
    fn toml_overrides() {
        let mut c = ExperimentConfig::default();
        c.merge_toml(
            "runs = 3\nepisodes = 10\nadversary = \"patrol5\"\nobservations = true\n\
             defense = \"pbrs-collision\"\nalpha = 0.5\nseed = 7\nextract_mode = \"analytic:0.1\"\n\
             chain_semantics = \"restart\"\n",
        )
        .unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.episodes, 10);
        assert_eq!(c.adversary, AdversaryKind::Patrol5);
        assert!(c.agent_observations);
        assert_eq!(
            c.defense.mechanism,
            DefenseMechanism::Pbrs(PotentialKind::CollisionFreeProb)
        );
        assert_eq!(c.learner.alpha, 0.5);
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.extract_mode, ExtractionMode::Analytic { epsilon: 0.1 });
        assert_eq!(c.chain_semantics, ChainSemantics::Restart);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let mut c = ExperimentConfig::default();
        match c.merge_toml("episodse = 10\n") {
            Err(ConfigError::UnknownKey(k)) => assert_eq!(k, "episodse"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = ExperimentConfig::default();
        assert!(c.merge_toml("runs = \"many\"\n").is_err());
        assert!(c.merge_toml("defense = \"magic\"\n").is_err());
        let c = ExperimentConfig {
            runs: 0,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
