//! Multi-seed experiment runner.
//!
//! An experiment is the Cartesian product of agents, budgets `η` and seeds.
//! Each cell builds its warm start from `seeded(seed, 0)` and drives the
//! agent with `seeded(seed, 1)`, so agents sharing a seed see the same warm
//! start and a cell's output depends only on its own configuration.

pub mod check;
pub mod export;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{run_agent, AgentKind, AgentRun, EpisodeRecord, RunOptions};
use crate::env::{warm_start_dataset, EnvSpec};
use crate::error::{Error, ErrorReport, Result};
use crate::mdp::TabularMdp;
use crate::rng::seeded;
use crate::shield::AgentConfig;

pub use check::{check_env, default_eta_grid, CheckReport, DEFAULT_RANDOM_POLICIES};
pub use export::{average_curves, write_episode_csv, Curve, CSV_COLUMNS, MAX_CURVE_POINTS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub kind: AgentKind,
    /// Name used in file names and the `agent` column; defaults to the kind.
    #[serde(default)]
    pub label: Option<String>,
    /// `eta` is overridden by the experiment's budget grid.
    #[serde(default)]
    pub config: AgentConfig,
}

impl AgentSpec {
    pub fn new(kind: AgentKind, config: AgentConfig) -> Self {
        AgentSpec {
            kind,
            label: None,
            config,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub agents: Vec<AgentSpec>,
    pub total_episodes: usize,
    /// Empty means a grid bracketing the optimal policy's `η_min`.
    #[serde(default)]
    pub eta_values: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub warm_start_episodes: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub trace: bool,
    /// Run even when the diameter check fails.
    #[serde(default)]
    pub force: bool,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_episodes == 0 {
            return Err(Error::Config("total_episodes must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("agents must not be empty".into()));
        }
        if let Some(eta) = self.eta_values.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("every eta must be positive, got {eta}")));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let mut labels: Vec<&str> = self.agents.iter().map(AgentSpec::label).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate agent label {:?}", w[0])));
        }
        for a in &self.agents {
            let mut c = a.config.clone();
            c.eta = 1.0;
            c.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub agent: String,
    pub kind: AgentKind,
    pub seed: u64,
    pub eta: f64,
    pub episodes: usize,
    pub total_violations: usize,
    pub final_cum_regret: f64,
    pub optimal_value: f64,
    pub meta_completed: usize,
    pub meta_malformed: usize,
    pub episodes_per_meta: BTreeMap<usize, usize>,
    pub planning_calls: usize,
    pub sandwich_failures: usize,
    pub max_zeta: f64,
    pub zeta_over_eta_steps: usize,
    pub zeta_below_true_steps: usize,
    pub target_misses: usize,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub agent: String,
    pub seed: u64,
    pub eta: f64,
    pub error: ErrorReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub env: EnvSpec,
    pub total_episodes: usize,
    pub warm_start_episodes: usize,
    pub eta_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub check: CheckReport,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<CellFailure>,
    pub curves: Vec<Curve>,
}

/// Everything `run_experiment` produced, in memory.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    /// Per-cell logs of the successful cells, in cell order.
    pub logs: Vec<(CellSummary, Vec<EpisodeRecord>)>,
}

#[derive(Clone, Copy)]
struct Cell<'a> {
    spec: &'a AgentSpec,
    eta: f64,
    seed: u64,
}

impl Cell<'_> {
    fn stem(&self) -> String {
        format!("{}__eta{}__seed{}", self.spec.label(), self.eta, self.seed)
    }
}

fn summarize(cell: &Cell<'_>, run: &AgentRun, csv: String) -> CellSummary {
    CellSummary {
        agent: cell.spec.label().to_string(),
        kind: cell.spec.kind,
        seed: cell.seed,
        eta: cell.eta,
        episodes: run.records.len(),
        total_violations: run.stats.violations,
        final_cum_regret: run.cum_regret(),
        optimal_value: run.optimal_value,
        meta_completed: run.stats.meta_completed,
        meta_malformed: run.stats.meta_malformed,
        episodes_per_meta: export::histogram(&run.stats.episodes_per_meta),
        planning_calls: run.stats.planning_calls,
        sandwich_failures: run.stats.sandwich_failures,
        max_zeta: run.stats.max_zeta,
        zeta_over_eta_steps: run.stats.zeta_over_eta_steps,
        zeta_below_true_steps: run.stats.zeta_below_true_steps,
        target_misses: run.stats.target_misses,
        csv,
    }
}

/// Runs one cell in memory: warm start, then the agent.
pub fn run_cell(
    mdp: &TabularMdp,
    spec: &AgentSpec,
    eta: f64,
    seed: u64,
    total_episodes: usize,
    warm_start_episodes: usize,
    trace: bool,
) -> Result<AgentRun> {
    let warm = warm_start_dataset(mdp, warm_start_episodes, &mut seeded(seed, 0));
    let config = AgentConfig {
        eta,
        ..spec.config.clone()
    };
    let opts = RunOptions {
        trace,
        ..RunOptions::new(total_episodes)
    };
    run_agent(spec.kind, mdp, &config, &warm, &opts, &mut seeded(seed, 1))
}

fn execute_cell(
    mdp: &TabularMdp,
    cfg: &ExperimentConfig,
    cell: &Cell<'_>,
) -> Result<(CellSummary, Vec<EpisodeRecord>)> {
    let run = run_cell(
        mdp,
        cell.spec,
        cell.eta,
        cell.seed,
        cfg.total_episodes,
        cfg.warm_start_episodes,
        cfg.trace,
    )?;
    let stem = cell.stem();
    let cells_dir = cfg.output_dir.join("cells");
    let csv_name = format!("cells/{stem}.csv");

    let mut buf = Vec::new();
    write_episode_csv(&mut buf, cell.spec.label(), cell.seed, cell.eta, &run.records)?;
    export::write_file(&cells_dir.join(format!("{stem}.csv")), &buf)?;
    if cfg.trace {
        let mut buf = Vec::new();
        export::write_trace_csv(&mut buf, &run.trace)?;
        export::write_file(&cells_dir.join(format!("{stem}.trace.csv")), &buf)?;
    }
    let summary = summarize(cell, &run, csv_name);
    export::write_json(&cells_dir.join(format!("{stem}.json")), &summary)?;
    Ok((summary, run.records))
}

/// Runs every (agent, η, seed) cell and writes per-cell CSV and JSON files
/// plus `summary.json` under `output_dir`.
///
/// A failing cell is recorded in the summary's `failures` and does not stop
/// the others. Errors that affect every cell (bad config, environment
/// build, diameter check without `force`) are returned directly.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mdp = cfg.env.build()?;
    let first_eta = cfg.eta_values.first().copied().unwrap_or(0.12);
    let mut check = check_env(&mdp, first_eta, DEFAULT_RANDOM_POLICIES, 0)?;
    if !check.diameter_ok && !cfg.force {
        return Err(Error::Assumption(format!(
            "worst-case diameter {} exceeds H/2 = {}; pass --force to run anyway",
            check.upsilon, check.upsilon_bound
        )));
    }
    let eta_values = if cfg.eta_values.is_empty() {
        default_eta_grid(check.eta_min_optimal)
    } else {
        cfg.eta_values.clone()
    };
    check.eta = eta_values[0];
    check.single_step_ok = check.eta >= check.eta_min_optimal;

    let cells: Vec<Cell<'_>> = cfg
        .agents
        .iter()
        .flat_map(|spec| {
            eta_values
                .iter()
                .flat_map(move |&eta| cfg.seeds.iter().map(move |&seed| Cell { spec, eta, seed }))
        })
        .collect();

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(CellSummary, Vec<EpisodeRecord>)>> =
        pool.install(|| cells.par_iter().map(|cell| execute_cell(&mdp, cfg, cell)).collect());

    let mut logs = Vec::new();
    let mut failures = Vec::new();
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(log) => logs.push(log),
            Err(e) => failures.push(CellFailure {
                agent: cell.spec.label().to_string(),
                seed: cell.seed,
                eta: cell.eta,
                error: e.report(),
            }),
        }
    }

    let mut curves = Vec::new();
    for spec in &cfg.agents {
        for &eta in &eta_values {
            let runs: Vec<(u64, &[EpisodeRecord])> = logs
                .iter()
                .filter(|(s, _)| s.agent == spec.label() && s.eta == eta)
                .map(|(s, r)| (s.seed, r.as_slice()))
                .collect();
            if !runs.is_empty() {
                curves.push(average_curves(spec.label(), eta, &runs));
            }
        }
    }

    let summary = ExperimentSummary {
        env: cfg.env.clone(),
        total_episodes: cfg.total_episodes,
        warm_start_episodes: cfg.warm_start_episodes,
        eta_values,
        seeds: cfg.seeds.clone(),
        check,
        cells: logs.iter().map(|(s, _)| s.clone()).collect(),
        failures,
        curves,
    };
    export::write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    Ok(ExperimentOutput { summary, logs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RandomMdpParams;

    fn config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            env: EnvSpec::RandomErgodic(RandomMdpParams::new(3, 2, 8, 0.1, 4)),
            agents: vec![
                AgentSpec::new(
                    AgentKind::UnifConservUcbvi,
                    AgentConfig {
                        bonus_scale: 0.01,
                        ..AgentConfig::default()
                    },
                ),
                AgentSpec::new(AgentKind::BaselineOnly, AgentConfig::default()),
            ],
            total_episodes: 30,
            eta_values: vec![0.2, 0.5],
            seeds: vec![1, 2],
            warm_start_episodes: 20,
            output_dir: dir.to_path_buf(),
            trace: false,
            force: false,
            workers: Some(2),
        }
    }

    #[test]
    fn cartesian_product_of_cells() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config(dir.path())).unwrap();
        assert_eq!(out.summary.cells.len() + out.summary.failures.len(), 8);
        assert!(out.summary.failures.is_empty());
        assert_eq!(out.summary.curves.len(), 4);
        assert!(dir.path().join("summary.json").exists());
        let csvs = fs::read_dir(dir.path().join("cells"))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "csv")
            .count();
        assert_eq!(csvs, 8);
    }

    #[test]
    fn violation_totals_match_rows() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config(dir.path())).unwrap();
        for (summary, records) in &out.logs {
            let v = records.iter().filter(|r| r.violated).count();
            assert_eq!(v, summary.total_violations);
            let text = fs::read_to_string(dir.path().join(&summary.csv)).unwrap();
            let col: usize = text
                .lines()
                .skip(1)
                .map(|l| l.split(',').nth(6).unwrap().parse::<usize>().unwrap())
                .sum();
            assert_eq!(col, v);
        }
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.seeds.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = config(dir.path());
        c.eta_values = vec![0.0];
        assert!(c.validate().is_err());
        let mut c = config(dir.path());
        c.agents.push(c.agents[1].clone());
        assert!(c.validate().is_err());
        let mut c = config(dir.path());
        c.total_episodes = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"env": {"kind": "inventory"}, "agents": [{"kind": "ucbvi"}],
                "total_episodes": 5, "seeds": [0]}"#,
        )
        .unwrap();
        assert!(cfg.eta_values.is_empty());
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert_eq!(cfg.agents[0].label(), "ucbvi");
        assert!(ExperimentConfig::from_json(r#"{"env": {"kind": "inventory"}, "agents": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn diameter_failure_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.env = EnvSpec::Inventory(Default::default());
        c.total_episodes = 2;
        c.warm_start_episodes = 1500;
        c.seeds = vec![0];
        c.eta_values = vec![0.4];
        assert!(matches!(run_experiment(&c), Err(Error::Assumption(_))));
        c.force = true;
        let out = run_experiment(&c).unwrap();
        assert!(!out.summary.check.diameter_ok);
        assert_eq!(out.summary.cells.len(), 2);
    }

    #[test]
    fn failing_cell_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        // a one-episode cap on a meta-episode that cannot finish in one
        // episode aborts only the shielded cells
        c.agents[0].config.max_episodes_per_meta = Some(1);
        c.agents[0].config.bonus_scale = 1.0;
        c.eta_values = vec![0.01];
        let out = run_experiment(&c).unwrap();
        assert!(out.summary.failures.iter().all(|f| f.error.kind == "meta_episode_cap"));
        assert_eq!(out.summary.failures.len(), 2);
        assert_eq!(out.summary.cells.len(), 2);
    }
}
