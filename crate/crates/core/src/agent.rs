//! Episode loops for the three agents compared in experiments.
//!
//! * `unif_conserv_ucbvi`: the shielded agent with meta-episode stitching,
//! * `ucbvi`: the optimistic policy every episode, unshielded,
//! * `baseline_only`: the conservative baseline every episode.
//!
//! All three recompute the baseline from the full data set at the start of
//! every episode and are scored against it for violations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{empirical_model, BonusTable, Counts};
use crate::mdp::{exact_optimal, sample_rollout, DeterministicPolicy, Rollout, StepAnnotation, TabularMdp};
use crate::planning::{optimistic_plan_with, sandwich_holds, PlanConfig, PlannerOutput};
use crate::shield::{run_unif_conserv_episode, true_deficits, AgentConfig, Baseline, MetaEpisodeState, MetaRollout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    UnifConservUcbvi,
    Ucbvi,
    BaselineOnly,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::UnifConservUcbvi, AgentKind::Ucbvi, AgentKind::BaselineOnly];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::UnifConservUcbvi => "unif_conserv_ucbvi",
            AgentKind::Ucbvi => "ucbvi",
            AgentKind::BaselineOnly => "baseline_only",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent {s:?}")))
    }
}

/// One row of an experiment log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// One-based episode number, warm start excluded.
    pub episode: usize,
    pub ret: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub violated: bool,
    pub max_deficit: f64,
    /// Meta-episode index; the episode number for `ucbvi`, zero for
    /// `baseline_only`.
    pub meta_index: usize,
    pub meta_episode_n: usize,
    pub ucb_steps: usize,
}

/// A step of an annotated trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub episode: usize,
    pub t: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub used_ucb: bool,
    pub zeta: f64,
    pub target: Option<usize>,
    /// Cumulative true deficit against the baseline in force.
    pub true_deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub total_episodes: usize,
    /// `N` inside the log term; defaults to `total_episodes`.
    pub planned_total_episodes: Option<usize>,
    pub trace: bool,
    pub keep_meta_rollouts: bool,
    pub sandwich_tol: f64,
}

impl RunOptions {
    pub fn new(total_episodes: usize) -> Self {
        RunOptions {
            total_episodes,
            planned_total_episodes: None,
            trace: false,
            keep_meta_rollouts: false,
            sandwich_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub planning_calls: usize,
    pub sandwich_failures: usize,
    pub violations: usize,
    pub meta_completed: usize,
    pub meta_malformed: usize,
    /// Number of episodes each completed meta-episode took.
    pub episodes_per_meta: Vec<usize>,
    pub max_zeta: f64,
    /// Steps where the tracked deficit exceeded `η`.
    pub zeta_over_eta_steps: usize,
    /// Steps where the tracked deficit fell below the true one.
    pub zeta_below_true_steps: usize,
    /// Episodes that never met their meta-episode target state.
    pub target_misses: usize,
}

#[derive(Clone, Debug)]
pub struct AgentRun {
    pub kind: AgentKind,
    pub optimal_value: f64,
    pub records: Vec<EpisodeRecord>,
    pub stats: RunStats,
    pub trace: Vec<TraceStep>,
    pub meta_rollouts: Vec<MetaRollout>,
    pub counts: Counts,
}

impl AgentRun {
    pub fn cum_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn violation_count(&self) -> usize {
        self.stats.violations
    }
}

struct Driver<'a> {
    kind: AgentKind,
    mdp: &'a TabularMdp,
    config: &'a AgentConfig,
    opts: &'a RunOptions,
    plan_cfg: PlanConfig,
    params: crate::estimation::BonusParams,
    v_star: f64,
    run: AgentRun,
}

impl Driver<'_> {
    /// Plans on `counts`, returning the optimistic plan and the baseline
    /// after checking the sandwich.
    fn plan(&mut self, counts: &Counts) -> Result<(PlannerOutput, Baseline)> {
        let model = empirical_model(counts);
        let bonus = BonusTable::from_counts(counts, &self.params);
        let h = self.mdp.horizon();
        let optimistic = optimistic_plan_with(&model, &bonus, h, &self.plan_cfg);
        let baseline = Baseline::compute(&model, &bonus, h, &self.plan_cfg)?;
        self.run.stats.planning_calls += 1;
        if !sandwich_holds(&optimistic, &baseline.conservative, &baseline.upper, self.opts.sandwich_tol) {
            self.run.stats.sandwich_failures += 1;
        }
        Ok((optimistic, baseline))
    }

    fn record(
        &mut self,
        rollout: &Rollout,
        baseline: &DeterministicPolicy,
        meta_index: usize,
        meta_episode_n: usize,
        ucb_steps: usize,
    ) -> Result<()> {
        let deficits = true_deficits(self.mdp, baseline, rollout)?;
        let max_deficit = deficits.iter().copied().fold(0.0, f64::max);
        let violated = max_deficit > self.config.eta;
        let ret = rollout.realized_return();
        let regret = self.v_star - ret;
        let cum_regret = self.run.cum_regret() + regret;
        self.run.stats.violations += usize::from(violated);

        let tracked = self.kind == AgentKind::UnifConservUcbvi;
        for (ann, &z_true) in rollout.annotations.iter().zip(&deficits) {
            if tracked {
                self.run.stats.max_zeta = self.run.stats.max_zeta.max(ann.zeta);
                self.run.stats.zeta_over_eta_steps += usize::from(ann.zeta > self.config.eta);
                self.run.stats.zeta_below_true_steps += usize::from(ann.zeta + 1e-9 < z_true);
            }
        }
        if self.opts.trace {
            for ((tr, ann), &z_true) in rollout.steps.iter().zip(&rollout.annotations).zip(&deficits) {
                self.run.trace.push(TraceStep {
                    episode: rollout.episode_index + 1,
                    t: tr.t,
                    s: tr.s,
                    a: tr.a,
                    r: tr.r,
                    s_next: tr.s_next,
                    used_ucb: ann.used_ucb,
                    zeta: ann.zeta,
                    target: ann.target,
                    true_deficit: z_true,
                });
            }
        }
        self.run.records.push(EpisodeRecord {
            episode: rollout.episode_index + 1,
            ret,
            regret,
            cum_regret,
            violated,
            max_deficit,
            meta_index,
            meta_episode_n,
            ucb_steps,
        });
        Ok(())
    }
}

/// Runs `kind` for `opts.total_episodes` episodes after loading
/// `warm_start` into every data set.
pub fn run_agent<R: Rng + ?Sized>(
    kind: AgentKind,
    mdp: &TabularMdp,
    config: &AgentConfig,
    warm_start: &[Rollout],
    opts: &RunOptions,
    rng: &mut R,
) -> Result<AgentRun> {
    config.validate()?;
    let (s_n, a_n, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let planned = opts.planned_total_episodes.unwrap_or(opts.total_episodes);
    let params = config.bonus_params(mdp, planned)?;
    let (v_opt, _, _) = exact_optimal(mdp);
    let v_star = v_opt.get(0, mdp.initial_state());

    let mut counts = Counts::new(s_n, a_n);
    for ro in warm_start {
        if !ro.is_well_formed(h) {
            return Err(Error::Dimension(format!(
                "warm-start episode {} is not a {h}-step rollout",
                ro.episode_index
            )));
        }
        counts.add_rollout(ro);
    }
    // meta-rollout data set used for the optimistic policy when
    // `use_full_data_for_ucb` is off
    let mut meta_counts = counts.clone();

    let mut d = Driver {
        kind,
        mdp,
        config,
        opts,
        plan_cfg: config.plan_config(),
        params,
        v_star,
        run: AgentRun {
            kind,
            optimal_value: v_star,
            records: Vec::with_capacity(opts.total_episodes),
            stats: RunStats::default(),
            trace: Vec::new(),
            meta_rollouts: Vec::new(),
            counts: Counts::new(s_n, a_n),
        },
    };

    let mut meta = MetaEpisodeState::new(1, mdp.initial_state(), h);
    let mut pi_hat: Option<DeterministicPolicy> = None;

    for k in 0..opts.total_episodes {
        let (optimistic, baseline) = d.plan(&counts)?;
        let rollout = match kind {
            AgentKind::BaselineOnly | AgentKind::Ucbvi => {
                let policy = if kind == AgentKind::Ucbvi {
                    &optimistic.policy
                } else {
                    baseline.policy()
                };
                let mut ro = sample_rollout(mdp, k, |t, s, _| policy.action(t, s), rng)?;
                let used = kind == AgentKind::Ucbvi;
                for ann in &mut ro.annotations {
                    *ann = StepAnnotation {
                        used_ucb: used,
                        ..StepAnnotation::default()
                    };
                }
                let (m, n, u) = if used { (k + 1, 1, h) } else { (0, 0, 0) };
                d.record(&ro, baseline.policy(), m, n, u)?;
                ro
            }
            AgentKind::UnifConservUcbvi => {
                if meta.is_complete() {
                    meta = MetaEpisodeState::new(meta.meta_index + 1, mdp.initial_state(), h);
                    pi_hat = None;
                }
                let pi = match &mut pi_hat {
                    Some(p) => p,
                    slot @ None => {
                        let p = if config.use_full_data_for_ucb {
                            optimistic.policy.clone()
                        } else {
                            d.plan(&meta_counts)?.0.policy
                        };
                        slot.insert(p)
                    }
                };
                let misses = meta.target_misses;
                let out = run_unif_conserv_episode(mdp, &mut meta, pi, &baseline, config, k, rng)?;
                d.run.stats.target_misses += meta.target_misses - misses;
                d.record(&out.rollout, baseline.policy(), meta.meta_index, out.meta_episode_n, out.ucb_steps)?;
                if let Some(mr) = out.completed {
                    d.run.stats.meta_completed += 1;
                    d.run.stats.episodes_per_meta.push(meta.episodes_this_meta);
                    if !mr.is_well_formed(h) {
                        d.run.stats.meta_malformed += 1;
                    }
                    for tr in mr.transitions() {
                        meta_counts.update(tr);
                    }
                    if opts.keep_meta_rollouts {
                        d.run.meta_rollouts.push(mr);
                    }
                }
                out.rollout
            }
        };
        counts.add_rollout(&rollout);
    }
    d.run.counts = counts;
    Ok(d.run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_inventory_mdp, warm_start_dataset, InventoryParams};
    use crate::rng::seeded;

    fn inventory() -> TabularMdp {
        build_inventory_mdp(&InventoryParams::default()).unwrap()
    }

    fn run(kind: AgentKind, seed: u64, n: usize, scale: f64) -> AgentRun {
        let mdp = inventory();
        let warm = warm_start_dataset(&mdp, 1500, &mut seeded(seed, 0));
        let cfg = AgentConfig {
            eta: 0.3,
            bonus_scale: scale,
            ..AgentConfig::default()
        };
        run_agent(kind, &mdp, &cfg, &warm, &RunOptions::new(n), &mut seeded(seed, 1)).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("ucb".parse::<AgentKind>().is_err());
    }

    #[test]
    fn baseline_never_violates() {
        let r = run(AgentKind::BaselineOnly, 3, 100, 0.001);
        assert_eq!(r.records.len(), 100);
        assert_eq!(r.violation_count(), 0);
        assert!(r.records.iter().all(|x| x.max_deficit == 0.0 && x.meta_index == 0 && x.ucb_steps == 0));
    }

    #[test]
    fn ucbvi_columns() {
        let r = run(AgentKind::Ucbvi, 3, 30, 0.001);
        for (k, rec) in r.records.iter().enumerate() {
            assert_eq!((rec.episode, rec.meta_index, rec.meta_episode_n, rec.ucb_steps), (k + 1, k + 1, 1, 20));
        }
    }

    #[test]
    fn regret_accumulates() {
        let r = run(AgentKind::UnifConservUcbvi, 5, 200, 0.001);
        let mut acc = 0.0;
        for rec in &r.records {
            assert!((rec.regret - (r.optimal_value - rec.ret)).abs() < 1e-12);
            acc += rec.regret;
            assert!((rec.cum_regret - acc).abs() < 1e-9);
        }
        assert_eq!(r.stats.sandwich_failures, 0);
        assert_eq!(r.stats.planning_calls, 200);
    }

    #[test]
    fn shielded_agent_stitches_and_tracks() {
        let r = run(AgentKind::UnifConservUcbvi, 7, 400, 0.001);
        assert!(r.stats.meta_completed > 0);
        assert_eq!(r.stats.meta_malformed, 0);
        assert_eq!(r.stats.zeta_below_true_steps, 0);
        let ucb_total: usize = r.records.iter().map(|x| x.ucb_steps).sum();
        assert!(ucb_total >= 20 * r.stats.meta_completed);
        let n_sum: usize = r.stats.episodes_per_meta.iter().sum();
        assert!(n_sum <= 400);
    }

    #[test]
    fn same_seed_same_log() {
        let a = run(AgentKind::UnifConservUcbvi, 11, 150, 0.001);
        let b = run(AgentKind::UnifConservUcbvi, 11, 150, 0.001);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn trace_covers_every_step() {
        let mdp = inventory();
        let opts = RunOptions {
            trace: true,
            ..RunOptions::new(5)
        };
        let r = run_agent(
            AgentKind::UnifConservUcbvi,
            &mdp,
            &AgentConfig::default(),
            &[],
            &opts,
            &mut seeded(1, 1),
        )
        .unwrap();
        assert_eq!(r.trace.len(), 5 * 20);
    }

    #[test]
    fn malformed_warm_start_rejected() {
        let mdp = inventory();
        let mut warm = warm_start_dataset(&mdp, 2, &mut seeded(1, 0));
        warm[1].steps.pop();
        let err = run_agent(
            AgentKind::Ucbvi,
            &mdp,
            &AgentConfig::default(),
            &warm,
            &RunOptions::new(1),
            &mut seeded(1, 1),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
