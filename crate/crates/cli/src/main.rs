use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gridsafe::defenses::{DefenseMechanism, PotentialSign};
use gridsafe::dtmc::{ChainSemantics, ExtractionMode};
use gridsafe::harness::{
    run_experiment, scenario, verify_pipeline, Experiment, ExperimentConfig, VerificationReport,
    DEFAULT_PROPERTIES,
};
use gridsafe::learners::AdversaryKind;

#[derive(Parser)]
#[command(name = "gridsafe", version, about = "Train grid-world agents against adversaries and model-check the learned policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and write learning curves and Q-tables.
    Train(Opts),
    /// Train, extract a chain per run, and check PCTL properties.
    Verify(Opts),
    /// Train and export each run's chain as `.tra`/`.lab`.
    Export(Opts),
    /// Run the adversary comparison and all four scenarios.
    Sweep(Opts),
    /// Verify one of the preset scenarios (1-4).
    Scenario {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        n: u8,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// TOML file of experiment keys, applied before any flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long)]
    timeout_steps: Option<u32>,
    /// patrol3 | patrol5 | learning | learning-obs
    #[arg(long)]
    adversary: Option<AdversaryKind>,
    /// none | pbrs-distance | pbrs-collision | q-obs | modified-q
    #[arg(long)]
    defense: Option<DefenseMechanism>,
    /// Give the agent its neighbourhood observations (`--observations false` to disable).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    observations: Option<bool>,
    /// toward-goal | literal
    #[arg(long)]
    potential_sign: Option<PotentialSign>,
    #[arg(long, allow_hyphen_values = true)]
    adv_penalty: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon_start: Option<f64>,
    #[arg(long)]
    epsilon_decay: Option<f64>,
    #[arg(long)]
    epsilon_floor: Option<f64>,
    /// empirical[:N] | analytic[:EPS]
    #[arg(long)]
    extract_mode: Option<ExtractionMode>,
    /// absorbing | restart
    #[arg(long)]
    chain_semantics: Option<ChainSemantics>,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// PCTL property to check; repeatable. Defaults to P1-P3.
    #[arg(long = "property")]
    properties: Vec<String>,
}

impl Opts {
    fn config(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut c = base;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            c.merge_toml(&text).with_context(|| format!("in {}", path.display()))?;
        }
        macro_rules! set {
            ($($flag:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag { $target = v; })*
            };
        }
        set! {
            seed => c.master_seed,
            runs => c.runs,
            episodes => c.episodes,
            timeout_steps => c.timeout_steps,
            adversary => c.adversary,
            defense => c.defense.mechanism,
            observations => c.agent_observations,
            potential_sign => c.defense.potential_sign,
            adv_penalty => c.defense.adv_penalty,
            alpha => c.learner.alpha,
            gamma => c.learner.gamma,
            epsilon_start => c.learner.epsilon.initial,
            epsilon_decay => c.learner.epsilon.decay,
            epsilon_floor => c.learner.epsilon.floor,
            extract_mode => c.extract_mode,
            chain_semantics => c.chain_semantics,
            jobs => c.jobs,
        }
        c.validate()?;
        Ok(c)
    }

    fn properties(&self) -> Vec<String> {
        if self.properties.is_empty() {
            DEFAULT_PROPERTIES.iter().map(|s| s.to_string()).collect()
        } else {
            self.properties.clone()
        }
    }
}

fn write_experiment(exp: &Experiment, dir: &Path) -> Result<()> {
    let written = exp
        .write_artifacts(dir)
        .with_context(|| format!("writing results to {}", dir.display()))?;
    print!("{}", exp.summary());
    println!("wrote {} files under {}", written.len(), dir.display());
    Ok(())
}

fn write_report(report: &VerificationReport, dir: &Path) -> Result<()> {
    let table = report.table();
    fs::write(dir.join("verification.txt"), &table)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(dir.join("verification.csv"), csv)?;
    print!("{table}");
    Ok(())
}

fn verify(config: &ExperimentConfig, properties: &[String], dir: &Path) -> Result<()> {
    let (exp, report) = verify_pipeline(config, properties)?;
    write_experiment(&exp, dir)?;
    write_report(&report, dir)
}

fn sweep(opts: &Opts) -> Result<()> {
    let comparisons = [
        ("patrol5-obs", AdversaryKind::Patrol5, true),
        ("patrol3-obs", AdversaryKind::Patrol3, true),
        ("patrol5", AdversaryKind::Patrol5, false),
        ("patrol3", AdversaryKind::Patrol3, false),
        ("learning", AdversaryKind::Learning { with_observations: false }, false),
        ("learning-obs", AdversaryKind::Learning { with_observations: true }, true),
    ];
    for (name, adversary, observations) in comparisons {
        let base = ExperimentConfig {
            adversary,
            agent_observations: observations,
            ..ExperimentConfig::default()
        };
        let mut config = opts.config(base)?;
        config.adversary = adversary;
        config.agent_observations = observations;
        println!("== {name}");
        write_experiment(&run_experiment(&config, false)?, &opts.out_dir.join(name))?;
    }
    for n in 1..=4 {
        let mut config = opts.config(scenario(n)?)?;
        config.defense.mechanism = scenario(n)?.defense.mechanism;
        println!("== scenario {n}");
        verify(&config, &opts.properties(), &opts.out_dir.join(format!("scenario{n}")))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(o) => write_experiment(&run_experiment(&o.config(ExperimentConfig::default())?, false)?, &o.out_dir),
        Command::Export(o) => write_experiment(&run_experiment(&o.config(ExperimentConfig::default())?, true)?, &o.out_dir),
        Command::Verify(o) => verify(&o.config(ExperimentConfig::default())?, &o.properties(), &o.out_dir),
        Command::Scenario { n, opts } => verify(&opts.config(scenario(n)?)?, &opts.properties(), &opts.out_dir),
        Command::Sweep(o) => sweep(&o),
    }
}
