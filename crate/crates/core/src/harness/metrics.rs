//! Learning-curve metrics aggregated across runs.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::simulation::EpisodeSummary;

/// Width of the trailing window for the collision rate.
pub const COLLISION_WINDOW: usize = 100;

/// Fraction of collisions over the last `COLLISION_WINDOW` episodes ending
/// at each episode (fewer at the start).
pub fn collision_rate(episodes: &[EpisodeSummary]) -> Vec<f64> {
    let mut out = Vec::with_capacity(episodes.len());
    let mut in_window = 0usize;
    for (i, e) in episodes.iter().enumerate() {
        in_window += e.collided() as usize;
        if i >= COLLISION_WINDOW {
            in_window -= episodes[i - COLLISION_WINDOW].collided() as usize;
        }
        out.push(in_window as f64 / (i + 1).min(COLLISION_WINDOW) as f64);
    }
    out
}

/// Running sum: entry `x` holds the total over episodes `1..=x+1`.
pub fn cumulative(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    values
        .into_iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Population mean and standard deviation, summed in slice order.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-run series of one experiment, in run-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub runs: Vec<Vec<EpisodeSummary>>,
}

/// A metric's name and how to compute its per-episode series for one run.
type Series = (&'static str, fn(&[EpisodeSummary]) -> Vec<f64>);

const SERIES: [Series; 6] = [
    ("collision", |e| e.iter().map(|x| x.collided() as u8 as f64).collect()),
    ("collision_rate", collision_rate),
    ("agent_reward", |e| e.iter().map(|x| x.agent_return).collect()),
    ("agent_cumulative", |e| cumulative(e.iter().map(|x| x.agent_return))),
    ("adversary_reward", |e| e.iter().map(|x| x.adversary_return).collect()),
    ("adversary_cumulative", |e| cumulative(e.iter().map(|x| x.adversary_return))),
];

impl Metrics {
    pub fn new(runs: Vec<Vec<EpisodeSummary>>) -> Self {
        Metrics { runs }
    }

    pub fn episodes(&self) -> usize {
        self.runs.first().map_or(0, Vec::len)
    }

    fn series(&self, name: &str) -> Vec<Vec<f64>> {
        let (_, f) = SERIES
            .iter()
            .find(|(n, _)| *n == name)
            .expect("known metric");
        self.runs.iter().map(|r| f(r)).collect()
    }

    /// Mean and standard deviation across runs of a named metric at
    /// 1-based `episode`.
    pub fn at(&self, name: &str, episode: usize) -> (f64, f64) {
        let column: Vec<f64> = self.series(name).iter().map(|s| s[episode - 1]).collect();
        mean_std(&column)
    }

    pub fn collision_rate_at(&self, episode: usize) -> (f64, f64) {
        self.at("collision_rate", episode)
    }

    pub fn cumulative_reward_at(&self, episode: usize) -> (f64, f64) {
        self.at("agent_cumulative", episode)
    }

    /// Collision rate of each run at its final episode.
    pub fn final_collision_rates(&self) -> Vec<f64> {
        self.series("collision_rate")
            .iter()
            .map(|s| *s.last().expect("non-empty run"))
            .collect()
    }

    /// One row per episode: `episode`, then mean and stddev of each metric.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let all: Vec<Vec<Vec<f64>>> = SERIES.iter().map(|(n, _)| self.series(n)).collect();
        let mut header = String::from("episode");
        for (name, _) in &SERIES {
            write!(header, ",{name}_mean,{name}_std").unwrap();
        }
        writeln!(out, "{header}")?;
        let mut column = Vec::with_capacity(self.runs.len());
        for ep in 0..self.episodes() {
            let mut line = (ep + 1).to_string();
            for per_run in &all {
                column.clear();
                column.extend(per_run.iter().map(|s| s[ep]));
                let (m, sd) = mean_std(&column);
                write!(line, ",{m},{sd}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Collision rate and cumulative reward at quarter points of training.
    pub fn summary_table(&self, title: &str) -> String {
        let n = self.episodes();
        let mut checkpoints: Vec<usize> = [500, 1000, 1500, 2000]
            .into_iter()
            .filter(|&c| c <= n)
            .collect();
        if checkpoints.last() != Some(&n) && n > 0 {
            checkpoints.push(n);
        }
        let mut s = format!("{title} ({} runs)\n", self.runs.len());
        writeln!(
            s,
            "{:>8}  {:>17}  {:>23}",
            "episode", "collision rate", "cumulative reward"
        )
        .unwrap();
        for c in checkpoints {
            let (cm, cs) = self.collision_rate_at(c);
            let (rm, rs) = self.cumulative_reward_at(c);
            writeln!(s, "{c:>8}  {cm:>8.2} ± {cs:<6.2}  {rm:>11.1} ± {rs:<9.1}").unwrap();
        }
        s
    }
}
