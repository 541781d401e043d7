//! CSV and JSON output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeRecord, TraceStep};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 11] = [
    "episode",
    "agent",
    "seed",
    "eta",
    "ret",
    "cum_regret",
    "violated",
    "max_deficit",
    "meta_index",
    "meta_episode_n",
    "ucb_steps",
];

/// Largest number of points in an exported curve.
pub const MAX_CURVE_POINTS: usize = 2000;

#[derive(Serialize)]
struct CsvRow<'a> {
    episode: usize,
    agent: &'a str,
    seed: u64,
    eta: f64,
    ret: f64,
    cum_regret: f64,
    violated: u8,
    max_deficit: f64,
    meta_index: usize,
    meta_episode_n: usize,
    ucb_steps: usize,
}

/// Writes one cell's per-episode log. An empty log yields the header only.
pub fn write_episode_csv<W: Write>(out: W, agent: &str, seed: u64, eta: f64, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(CsvRow {
            episode: r.episode,
            agent,
            seed,
            eta,
            ret: r.ret,
            cum_regret: r.cum_regret,
            violated: u8::from(r.violated),
            max_deficit: r.max_deficit,
            meta_index: r.meta_index,
            meta_episode_n: r.meta_episode_n,
            ucb_steps: r.ucb_steps,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceStep]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "episode",
        "t",
        "s",
        "a",
        "r",
        "s_next",
        "used_ucb",
        "zeta",
        "target",
        "true_deficit",
    ])?;
    for step in trace {
        w.serialize(step)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_file(path, &text)
}

/// Evenly spaced indices into `0..n`, at most `max_points` of them, always
/// including the first and last.
pub fn downsample_indices(n: usize, max_points: usize) -> Vec<usize> {
    if n <= max_points {
        return (0..n).collect();
    }
    if max_points < 2 {
        return vec![n - 1];
    }
    (0..max_points).map(|k| k * (n - 1) / (max_points - 1)).collect()
}

/// `N_m` histogram: number of meta-episodes that took each episode count.
pub fn histogram(values: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

/// Seed-averaged curves of one (agent, η) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub agent: String,
    pub eta: f64,
    pub seeds: Vec<u64>,
    pub episode: Vec<usize>,
    pub mean_cum_regret: Vec<f64>,
    pub mean_cum_violations: Vec<f64>,
}

/// Averages per-seed logs of equal length episode by episode and
/// downsamples the result.
pub fn average_curves(agent: &str, eta: f64, runs: &[(u64, &[EpisodeRecord])]) -> Curve {
    let n = runs.iter().map(|(_, r)| r.len()).min().unwrap_or(0);
    let mut regret = vec![0.0; n];
    let mut violations = vec![0.0; n];
    for (_, records) in runs {
        let mut cum_v = 0usize;
        for (k, r) in records.iter().take(n).enumerate() {
            cum_v += usize::from(r.violated);
            regret[k] += r.cum_regret;
            violations[k] += cum_v as f64;
        }
    }
    let count = runs.len().max(1) as f64;
    let idx = downsample_indices(n, MAX_CURVE_POINTS);
    Curve {
        agent: agent.to_string(),
        eta,
        seeds: runs.iter().map(|(s, _)| *s).collect(),
        episode: idx.iter().map(|&k| k + 1).collect(),
        mean_cum_regret: idx.iter().map(|&k| regret[k] / count).collect(),
        mean_cum_violations: idx.iter().map(|&k| violations[k] / count).collect(),
    }
}
