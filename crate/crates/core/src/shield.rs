//! The uniformly conservative shield and the meta-episode controller.
//!
//! Within an episode the agent carries an internal state `z = (s', ζ)`:
//! a target state `s'` at which exploration may resume, and the reward
//! deficit `ζ` accrued since it resumed. The shield plays the optimistic
//! policy `π̂` while the target has been reached and `ζ ≤ η/2`, and the
//! baseline `π̄` otherwise. Steps played by `π̂` across the episodes of one
//! meta-episode are stitched into a single `H`-step meta-rollout: a
//! fragment always resumes at the state where the previous one stopped, and
//! `π̂` is indexed by the meta-step rather than the episode step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{BonusParams, BonusTable, Counts, EmpiricalModel};
use crate::mdp::{exact_policy_eval, DeterministicPolicy, QTable, Rollout, StepAnnotation, TabularMdp, Transition};
use crate::planning::{conservative_plan_with, optimistic_eval_with, EvalOutput, PlanConfig, PlannerOutput};
use crate::rng::sample_categorical;

/// Shield internal state `z = (s', ζ)`. `target = None` means the target
/// has been reached and deficit is accruing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InternalState {
    pub target: Option<usize>,
    pub zeta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Exploration budget `η`.
    pub eta: f64,
    /// Failure probability `δ` used in the bonus.
    pub delta: f64,
    /// Also require `ζ + (V̂ − Q̄)(s, π̂(s)) ≤ η` before an exploratory step.
    pub strict_gate: bool,
    /// Plan `π̂` from all data rather than from meta-rollouts only.
    pub use_full_data_for_ucb: bool,
    /// Cap on episodes within one meta-episode; `None` derives it from
    /// `δ`.
    pub max_episodes_per_meta: Option<usize>,
    /// Read the shield rule literally: the step at the target state itself
    /// is played by `π̄`. Meta-rollouts then lose the chaining property.
    pub literal_eq4: bool,
    /// Keep adding `V̂ − Q̄` to `ζ` on baseline steps after exploration.
    pub accrue_on_baseline: bool,
    /// Multiplier on the exploration bonus.
    pub bonus_scale: f64,
    pub gamma: f64,
    pub clip: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            eta: 0.12,
            delta: 0.1,
            strict_gate: false,
            use_full_data_for_ucb: true,
            max_episodes_per_meta: None,
            literal_eq4: false,
            accrue_on_baseline: false,
            bonus_scale: 1.0,
            gamma: 1.0,
            clip: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.max_episodes_per_meta == Some(0) {
            return Err(Error::Config("max_episodes_per_meta must be at least 1".into()));
        }
        if !(self.bonus_scale >= 0.0 && self.bonus_scale.is_finite()) {
            return Err(Error::Config("bonus_scale must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            gamma: self.gamma,
            clip: self.clip,
        }
    }

    /// `20 · ⌈6 ln(1/δ)⌉` unless set explicitly.
    pub fn meta_episode_cap(&self) -> usize {
        self.max_episodes_per_meta
            .unwrap_or_else(|| 20 * (6.0 * (1.0 / self.delta).ln()).ceil().max(1.0) as usize)
    }

    pub fn bonus_params(&self, mdp: &TabularMdp, planned_total_episodes: usize) -> Result<BonusParams> {
        Ok(BonusParams::new(
            mdp.num_states(),
            mdp.num_actions(),
            mdp.horizon(),
            self.delta,
            planned_total_episodes.max(1),
        )?
        .with_scale(self.bonus_scale))
    }
}

/// Internal state at the start of episode `n` (one-based) of a
/// meta-episode: the initial state as target for `n = 1`, otherwise the
/// recorded target.
pub fn init_internal(n: usize, initial_state: usize, target: Option<usize>) -> Result<InternalState> {
    let target = match (n, target) {
        (0, _) => return Err(Error::Config("episode index within a meta-episode is one-based".into())),
        (1, _) => initial_state,
        (_, Some(t)) => t,
        (_, None) => return Err(Error::Config(format!("episode {n} of a meta-episode needs a target"))),
    };
    Ok(InternalState {
        target: Some(target),
        zeta: 0.0,
    })
}

/// Internal-state transition after playing `a` in `s` at step `t`.
///
/// Before the target is met the state is unchanged; from the target on,
/// the surrogate gap `V̂^(π̄)_t(s) − Q̄_t(s, a)` is added to `ζ`.
pub fn sigma_update(
    z: InternalState,
    s: usize,
    a: usize,
    vhat: &EvalOutput,
    qbar: &QTable,
    t: usize,
) -> InternalState {
    match z.target {
        Some(target) if target != s => z,
        _ => InternalState {
            target: None,
            zeta: z.zeta + (vhat.v.get(t, s) - qbar.get(t, s, a)).max(0.0),
        },
    }
}

/// Shield decision. Returns the chosen action and whether it came from
/// `π̂`.
///
/// `gap` is the surrogate deficit of `π̂`'s action, consulted only by the
/// strict gate.
pub fn shield_action(
    s: usize,
    z: &InternalState,
    _t: usize,
    pi_hat_action: usize,
    pi_bar_action: usize,
    config: &AgentConfig,
    gap: f64,
) -> (usize, bool) {
    let at_target = match z.target {
        None => true,
        Some(target) => !config.literal_eq4 && target == s,
    };
    let within_budget = z.zeta <= config.eta / 2.0;
    let strict_ok = !config.strict_gate || z.zeta + gap.max(0.0) <= config.eta;
    if at_target && within_budget && strict_ok {
        (pi_hat_action, true)
    } else {
        (pi_bar_action, false)
    }
}

/// The baseline policy `π̄` with its lower bound `Q̄` and the optimistic
/// evaluation `V̂^(π̄)`, all computed from the same data.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub conservative: PlannerOutput,
    pub upper: EvalOutput,
}

impl Baseline {
    pub fn compute(model: &EmpiricalModel, bonus: &BonusTable, horizon: usize, cfg: &PlanConfig) -> Result<Self> {
        let conservative = conservative_plan_with(model, bonus, horizon, cfg);
        let upper = optimistic_eval_with(model, bonus, &conservative.policy, cfg)?;
        Ok(Baseline { conservative, upper })
    }

    pub fn from_counts(counts: &Counts, params: &BonusParams, cfg: &PlanConfig) -> Result<Self> {
        let model = crate::estimation::empirical_model(counts);
        let bonus = BonusTable::from_counts(counts, params);
        Baseline::compute(&model, &bonus, params.horizon, cfg)
    }

    pub fn policy(&self) -> &DeterministicPolicy {
        &self.conservative.policy
    }

    pub fn qbar(&self) -> &QTable {
        &self.conservative.q
    }

    /// `max{V̂^(π̄)_t(s) − Q̄_t(s, a), 0}`.
    pub fn surrogate_gap(&self, t: usize, s: usize, a: usize) -> f64 {
        (self.upper.v.get(t, s) - self.conservative.q.get(t, s, a)).max(0.0)
    }
}

/// A `π̂` step together with where it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaStep {
    pub transition: Transition,
    pub episode: usize,
    pub local_step: usize,
    pub meta_step: usize,
}

/// Steps `[start, end)` of `episode` that were played by `π̂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentMarker {
    pub episode: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaRollout {
    pub meta_index: usize,
    pub steps: Vec<MetaStep>,
}

impl MetaRollout {
    pub fn is_well_formed(&self, horizon: usize) -> bool {
        self.steps.len() == horizon
            && self
                .steps
                .windows(2)
                .all(|w| w[0].transition.s_next == w[1].transition.s)
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.steps.iter().map(|m| &m.transition)
    }
}

/// Bookkeeping for the meta-episode in progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaEpisodeState {
    /// One-based meta-episode index `m`.
    pub meta_index: usize,
    pub horizon: usize,
    pub ucb_steps_collected: usize,
    pub next_episode_target: usize,
    pub episodes_this_meta: usize,
    /// Episodes of this meta-episode that never met the target state.
    pub target_misses: usize,
    pub fragment_markers: Vec<FragmentMarker>,
    pub assembled: Vec<MetaStep>,
}

impl MetaEpisodeState {
    pub fn new(meta_index: usize, initial_state: usize, horizon: usize) -> Self {
        MetaEpisodeState {
            meta_index,
            horizon,
            ucb_steps_collected: 0,
            next_episode_target: initial_state,
            episodes_this_meta: 0,
            target_misses: 0,
            fragment_markers: Vec::new(),
            assembled: Vec::with_capacity(horizon),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.ucb_steps_collected >= self.horizon
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub rollout: Rollout,
    /// The meta-rollout, when this episode completed the meta-episode.
    pub completed: Option<MetaRollout>,
    /// One-based position of this episode within its meta-episode.
    pub meta_episode_n: usize,
    pub ucb_steps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Looking for the target state.
    Waiting,
    /// Target cleared by a baseline step (literal shield rule only).
    Armed,
    Exploring,
    Done,
}

/// Plays one episode of the shielded agent and advances `meta`.
///
/// `pi_hat` is the meta-episode's optimistic policy, indexed by meta-step;
/// `baseline` holds this episode's `π̄`, `Q̄` and `V̂^(π̄)`. Exploration only
/// starts at the target state and, once suspended, does not resume within
/// the same episode. After the meta-episode has collected `H` optimistic
/// steps the rest of the episode follows `π̄`.
#[allow(clippy::too_many_arguments)]
pub fn run_unif_conserv_episode<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    meta: &mut MetaEpisodeState,
    pi_hat: &DeterministicPolicy,
    baseline: &Baseline,
    config: &AgentConfig,
    episode_index: usize,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    if meta.is_complete() {
        return Err(Error::Config("meta-episode already complete".into()));
    }
    let h = mdp.horizon();
    let n = meta.episodes_this_meta + 1;
    let cap = config.meta_episode_cap();
    if n > cap {
        return Err(Error::MetaEpisodeCap {
            meta_index: meta.meta_index,
            target: meta.next_episode_target,
            misses: meta.target_misses,
            cap,
        });
    }
    let mut z = init_internal(n, mdp.initial_state(), Some(meta.next_episode_target))?;
    let mut phase = Phase::Waiting;
    let mut met_target = false;
    let mut steps = Vec::with_capacity(h);
    let mut annotations = Vec::with_capacity(h);
    let mut fragment: Option<FragmentMarker> = None;
    let mut last_ucb_next = None;
    let mut ucb_steps = 0;
    let mut s = mdp.initial_state();

    for t in 0..h {
        let a_bar = baseline.policy().action(t, s);
        let exploring_allowed = !meta.is_complete() && phase != Phase::Done;
        let (a, used) = if exploring_allowed {
            let a_hat = pi_hat.action(meta.ucb_steps_collected, s);
            let gap = baseline.surrogate_gap(t, s, a_hat);
            shield_action(s, &z, t, a_hat, a_bar, config, gap)
        } else {
            (a_bar, false)
        };
        if z.target == Some(s) {
            met_target = true;
        }
        let target_before = z.target;

        let s_next = sample_categorical(mdp.next_state_probs(s, a), rng);
        let step = Transition {
            t,
            s,
            a,
            r: mdp.reward(s, a),
            s_next,
        };

        match (phase, used) {
            (Phase::Waiting | Phase::Armed | Phase::Exploring, true) => {
                z = sigma_update(z, s, a, &baseline.upper, baseline.qbar(), t);
                phase = Phase::Exploring;
                meta.assembled.push(MetaStep {
                    transition: step,
                    episode: episode_index,
                    local_step: t,
                    meta_step: meta.ucb_steps_collected,
                });
                meta.ucb_steps_collected += 1;
                ucb_steps += 1;
                last_ucb_next = Some(s_next);
                let marker = fragment.get_or_insert(FragmentMarker {
                    episode: episode_index,
                    start: t,
                    end: t,
                });
                marker.end = t + 1;
                if meta.is_complete() {
                    phase = Phase::Done;
                }
            }
            (Phase::Waiting, false) => {
                if config.literal_eq4 && z.target == Some(s) {
                    z = sigma_update(z, s, a, &baseline.upper, baseline.qbar(), t);
                    phase = Phase::Armed;
                }
                // otherwise the target is either elsewhere or the strict
                // gate held exploration back; keep waiting
            }
            (Phase::Armed | Phase::Exploring, false) => {
                phase = Phase::Done;
                if config.accrue_on_baseline {
                    z = sigma_update(z, s, a, &baseline.upper, baseline.qbar(), t);
                }
            }
            (Phase::Done, _) => {
                if config.accrue_on_baseline && z.target.is_none() {
                    z = sigma_update(z, s, a, &baseline.upper, baseline.qbar(), t);
                }
            }
        }

        annotations.push(StepAnnotation {
            used_ucb: used,
            zeta: z.zeta,
            target: target_before,
        });
        steps.push(step);
        s = s_next;
    }

    meta.episodes_this_meta = n;
    if let Some(marker) = fragment {
        meta.fragment_markers.push(marker);
    }
    if let Some(next) = last_ucb_next {
        meta.next_episode_target = next;
    }
    if !met_target {
        meta.target_misses += 1;
    }

    let completed = meta.is_complete().then(|| MetaRollout {
        meta_index: meta.meta_index,
        steps: meta.assembled.clone(),
    });
    Ok(EpisodeOutcome {
        rollout: Rollout {
            episode_index,
            steps,
            annotations,
        },
        completed,
        meta_episode_n: n,
        ucb_steps,
    })
}

/// Ground-truth reward deficit of a rollout against the baseline that was
/// in force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub max_deficit: f64,
    pub violated: bool,
}

/// Per-step true deficits `z*_t = Σ_{τ≤t} max{V^(π̄)_τ(s_τ) − Q^(π̄)_τ(s_τ, a_τ), 0}`
/// on the true MDP.
pub fn true_deficits(mdp: &TabularMdp, baseline: &DeterministicPolicy, rollout: &Rollout) -> Result<Vec<f64>> {
    let (v, q) = exact_policy_eval(mdp, baseline)?;
    let mut acc = 0.0;
    Ok(rollout
        .steps
        .iter()
        .map(|tr| {
            acc += (v.get(tr.t, tr.s) - q.get(tr.t, tr.s, tr.a)).max(0.0);
            acc
        })
        .collect())
}

pub fn true_violation(
    mdp: &TabularMdp,
    baseline: &DeterministicPolicy,
    rollout: &Rollout,
    eta: f64,
) -> Result<Violation> {
    let max_deficit = true_deficits(mdp, baseline, rollout)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Violation {
        max_deficit,
        violated: max_deficit > eta,
    })
}
