use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dtmc::export_explicit;
use crate::error::{ConfigError, Error};
use crate::pctl::{check, parse, StateFormula, StateValues};

use super::config::ExperimentConfig;
use super::metrics::Metrics;
use super::simulation::{train_run, RunResult};

/// P1, P2 and P3: almost-sure recurrence of the goal, reaching it within
/// 100 steps, and reaching it eventually.
pub const DEFAULT_PROPERTIES: [&str; 3] =
    ["P>=1 [ G F goal ]", "P=? [ F<=100 goal ]", "P=? [ F goal ]"];

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub results: Vec<RunResult>,
    pub metrics: Metrics,
}

/// Trains every run, in parallel when `config.jobs` allows, and merges the
/// results by run index.
pub fn run_experiment(config: &ExperimentConfig, extract_chains: bool) -> Result<Experiment, Error> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<RunResult> = pool.install(|| {
        (0..config.runs as usize)
            .into_par_iter()
            .map(|i| train_run(config, i, extract_chains))
            .collect::<Result<_, _>>()
    })?;
    let metrics = Metrics::new(results.iter().map(|r| r.episodes.clone()).collect());
    Ok(Experiment {
        config: *config,
        results,
        metrics,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

impl Experiment {
    /// Writes `metrics.csv`, `summary.txt`, the final Q-tables, and any
    /// extracted chains under `dir`. Returns the paths written.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>, Error> {
        fs::create_dir_all(dir.join("qtables"))?;
        let mut written = Vec::new();

        let csv = dir.join("metrics.csv");
        let mut out = create(&csv)?;
        self.metrics.write_csv(&mut out)?;
        out.flush()?;
        written.push(csv);

        let summary = dir.join("summary.txt");
        fs::write(&summary, self.summary())?;
        written.push(summary);

        for r in &self.results {
            let path = dir.join("qtables").join(format!("run_{:03}_agent.csv", r.run_index));
            let mut out = create(&path)?;
            r.world.agent.q.write_csv(&mut out)?;
            out.flush()?;
            written.push(path);
            if let Some(q) = r.world.adversary.table() {
                let path = dir
                    .join("qtables")
                    .join(format!("run_{:03}_adversary.csv", r.run_index));
                let mut out = create(&path)?;
                q.write_csv(&mut out)?;
                out.flush()?;
                written.push(path);
            }
            if let Some(d) = &r.dtmc {
                fs::create_dir_all(dir.join("chains"))?;
                let (tra, lab) =
                    export_explicit(d, &dir.join("chains").join(format!("run_{:03}", r.run_index)))?;
                written.extend([tra, lab]);
            }
        }
        Ok(written)
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let title = format!(
            "adversary={} observations={} defense={} seed={}",
            c.adversary, c.agent_observations, c.defense.mechanism, c.master_seed
        );
        self.metrics.summary_table(&title)
    }
}

/// A property's value at the chain's initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// Bounded formula: its truth and, for a probability bound, the
    /// probability that was compared.
    Holds(bool, Option<f64>),
    Probability(f64),
}

impl Verdict {
    pub fn probability(&self) -> Option<f64> {
        match *self {
            Verdict::Holds(_, p) => p,
            Verdict::Probability(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub verdict: Verdict,
    pub iterations: u64,
    pub residual: f64,
}

/// Aggregate of one property across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertySummary {
    pub property: String,
    /// Runs where a bounded property held, out of all runs.
    pub satisfied: Option<usize>,
    /// Min, median and max probability.
    pub spread: Option<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub properties: Vec<String>,
    /// `outcomes[run][property]`.
    pub outcomes: Vec<Vec<PropertyOutcome>>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

impl VerificationReport {
    pub fn summaries(&self) -> Vec<PropertySummary> {
        self.properties
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let col: Vec<&PropertyOutcome> = self.outcomes.iter().map(|r| &r[j]).collect();
                let satisfied = col
                    .iter()
                    .map(|o| match o.verdict {
                        Verdict::Holds(b, _) => Some(b as usize),
                        Verdict::Probability(_) => None,
                    })
                    .sum::<Option<usize>>();
                let mut probs: Vec<f64> = col.iter().filter_map(|o| o.verdict.probability()).collect();
                probs.sort_by(f64::total_cmp);
                let spread = (probs.len() == col.len() && !probs.is_empty())
                    .then(|| (probs[0], median(&probs), probs[probs.len() - 1]));
                PropertySummary {
                    property: p.clone(),
                    satisfied,
                    spread,
                }
            })
            .collect()
    }

    /// `run,property,verdict,probability,iterations,residual`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "run,property,verdict,probability,iterations,residual")?;
        for (run, row) in self.outcomes.iter().enumerate() {
            for (p, o) in self.properties.iter().zip(row) {
                let (verdict, prob) = match o.verdict {
                    Verdict::Holds(b, p) => (b.to_string(), p.map_or(String::new(), |x| x.to_string())),
                    Verdict::Probability(x) => (x.to_string(), x.to_string()),
                };
                writeln!(
                    out,
                    "{run},\"{p}\",{verdict},{prob},{},{:e}",
                    o.iterations, o.residual
                )?;
            }
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<24} {:>9} {:>8} {:>8} {:>8}", "property", "satisfied", "min", "median", "max").unwrap();
        let runs = self.outcomes.len();
        for sum in self.summaries() {
            let sat = sum.satisfied.map_or("-".to_string(), |k| format!("{k}/{runs}"));
            let (lo, mid, hi) = match sum.spread {
                Some((a, b, c)) => (format!("{a:.4}"), format!("{b:.4}"), format!("{c:.4}")),
                None => ("-".into(), "-".into(), "-".into()),
            };
            writeln!(s, "{:<24} {:>9} {:>8} {:>8} {:>8}", sum.property, sat, lo, mid, hi).unwrap();
        }
        s
    }
}

pub fn parse_properties<S: AsRef<str>>(properties: &[S]) -> Result<Vec<StateFormula>, Error> {
    if properties.is_empty() {
        return Err(ConfigError::Invalid("no properties to verify".into()).into());
    }
    properties
        .iter()
        .map(|p| parse(p.as_ref()).map_err(Error::from))
        .collect()
}

/// Checks each formula on every extracted chain of `experiment`.
pub fn check_runs(experiment: &Experiment, formulas: &[StateFormula]) -> Result<VerificationReport, Error> {
    let mut outcomes = Vec::with_capacity(experiment.results.len());
    for r in &experiment.results {
        let d = r
            .dtmc
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("experiment was run without chain extraction".into()))?;
        let mut row = Vec::with_capacity(formulas.len());
        for f in formulas {
            let res = check(d, f)?;
            let verdict = match &res.values {
                StateValues::Prob(p) => Verdict::Probability(p[res.initial]),
                StateValues::Bool(b) => Verdict::Holds(b[res.initial], res.initial_probability()),
            };
            row.push(PropertyOutcome {
                verdict,
                iterations: res.diagnostics.iterations,
                residual: res.diagnostics.residual,
            });
        }
        outcomes.push(row);
    }
    Ok(VerificationReport {
        properties: formulas.iter().map(|f| f.to_string()).collect(),
        outcomes,
    })
}

/// Train, freeze, extract a chain per run, and check every property.
pub fn verify_pipeline<S: AsRef<str>>(
    config: &ExperimentConfig,
    properties: &[S],
) -> Result<(Experiment, VerificationReport), Error> {
    let formulas = parse_properties(properties)?;
    let experiment = run_experiment(config, true)?;
    let report = check_runs(&experiment, &formulas)?;
    Ok((experiment, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::AdversaryKind;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            runs: 3,
            episodes: 60,
            adversary: AdversaryKind::Patrol3,
            agent_observations: true,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn empty_property_list_rejected() {
        let none: [&str; 0] = [];
        assert!(matches!(
            verify_pipeline(&tiny(), &none),
            Err(Error::Config(ConfigError::Invalid(_)))
        ));
    }

    #[test]
    fn bad_property_rejected_before_training() {
        assert!(matches!(verify_pipeline(&tiny(), &["P>=1 [ F"]), Err(Error::Pctl(_))));
    }

    #[test]
    fn parallel_matches_serial() {
        let serial = run_experiment(&ExperimentConfig { jobs: 1, ..tiny() }, false).unwrap();
        let parallel = run_experiment(&ExperimentConfig { jobs: 4, ..tiny() }, false).unwrap();
        assert_eq!(serial.metrics, parallel.metrics);
        for (a, b) in serial.results.iter().zip(&parallel.results) {
            assert_eq!(a.world.agent.q, b.world.agent.q);
        }
    }

    #[test]
    fn pipeline_reports_every_run_and_property() {
        let (exp, report) = verify_pipeline(&tiny(), &DEFAULT_PROPERTIES).unwrap();
        assert_eq!(exp.results.len(), 3);
        assert_eq!(report.outcomes.len(), 3);
        assert!(report.outcomes.iter().all(|r| r.len() == 3));
        let sums = report.summaries();
        assert!(sums[0].satisfied.is_some());
        assert!(sums[1].satisfied.is_none());
        for s in &sums {
            let (lo, mid, hi) = s.spread.unwrap();
            assert!(0.0 <= lo && lo <= mid && mid <= hi && hi <= 1.0 + 1e-9);
        }
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 9);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 5.0]), 2.5);
    }
}
