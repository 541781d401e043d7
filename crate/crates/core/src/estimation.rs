//! Sufficient statistics, the empirical model and the exploration bonus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Rollout, Transition};

/// Visit counts and reward sums over a transition stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    num_states: usize,
    num_actions: usize,
    visits: Vec<u64>,
    next_counts: Vec<u64>,
    reward_sum: Vec<f64>,
}

impl Counts {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Counts {
            num_states,
            num_actions,
            visits: vec![0; num_states * num_actions],
            next_counts: vec![0; num_states * num_actions * num_states],
            reward_sum: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn update(&mut self, step: &Transition) {
        let sa = step.s * self.num_actions + step.a;
        self.visits[sa] += 1;
        self.next_counts[sa * self.num_states + step.s_next] += 1;
        self.reward_sum[sa] += step.r;
    }

    pub fn add_rollout(&mut self, rollout: &Rollout) {
        for step in &rollout.steps {
            self.update(step);
        }
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.num_actions + a]
    }

    pub fn next_count(&self, s: usize, a: usize, s_next: usize) -> u64 {
        self.next_counts[(s * self.num_actions + a) * self.num_states + s_next]
    }

    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sum[s * self.num_actions + a]
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Restores a checkpoint, checking internal consistency.
    pub fn from_json(json: &str) -> Result<Self> {
        let c: Counts = serde_json::from_str(json)?;
        let sa = c.num_states * c.num_actions;
        if c.visits.len() != sa || c.reward_sum.len() != sa || c.next_counts.len() != sa * c.num_states {
            return Err(Error::Dimension("counts arrays do not match S and A".into()));
        }
        for (i, &n) in c.visits.iter().enumerate() {
            let row: u64 = c.next_counts[i * c.num_states..(i + 1) * c.num_states].iter().sum();
            if row != n {
                return Err(Error::InvalidModel(format!(
                    "next-state counts of pair {i} sum to {row}, visits say {n}"
                )));
            }
        }
        Ok(c)
    }
}

/// Sample-average model. Unvisited pairs get a uniform next-state
/// distribution and zero reward.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    p_hat: Vec<f64>,
    r_hat: Vec<f64>,
}

impl EmpiricalModel {
    /// Wraps an explicit model, e.g. the true MDP for reduction tests.
    pub fn from_parts(
        num_states: usize,
        num_actions: usize,
        p_hat: Vec<f64>,
        r_hat: Vec<f64>,
    ) -> Result<Self> {
        if p_hat.len() != num_states * num_actions * num_states || r_hat.len() != num_states * num_actions {
            return Err(Error::Dimension("model arrays do not match S and A".into()));
        }
        Ok(EmpiricalModel {
            num_states,
            num_actions,
            p_hat,
            r_hat,
        })
    }

    pub fn from_mdp(mdp: &crate::mdp::TabularMdp) -> Self {
        let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
        let mut p_hat = Vec::with_capacity(s_n * a_n * s_n);
        let mut r_hat = Vec::with_capacity(s_n * a_n);
        for s in 0..s_n {
            for a in 0..a_n {
                p_hat.extend_from_slice(mdp.next_state_probs(s, a));
                r_hat.push(mdp.reward(s, a));
            }
        }
        EmpiricalModel {
            num_states: s_n,
            num_actions: a_n,
            p_hat,
            r_hat,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn p_hat(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.p_hat[start..start + self.num_states]
    }

    pub fn r_hat(&self, s: usize, a: usize) -> f64 {
        self.r_hat[s * self.num_actions + a]
    }
}

pub fn empirical_model(counts: &Counts) -> EmpiricalModel {
    let (s_n, a_n) = (counts.num_states, counts.num_actions);
    let mut p_hat = vec![1.0 / s_n as f64; s_n * a_n * s_n];
    let mut r_hat = vec![0.0; s_n * a_n];
    for sa in 0..s_n * a_n {
        let n = counts.visits[sa];
        if n == 0 {
            continue;
        }
        let nf = n as f64;
        for y in 0..s_n {
            p_hat[sa * s_n + y] = counts.next_counts[sa * s_n + y] as f64 / nf;
        }
        r_hat[sa] = (counts.reward_sum[sa] / nf).clamp(0.0, 1.0);
    }
    EmpiricalModel {
        num_states: s_n,
        num_actions: a_n,
        p_hat,
        r_hat,
    }
}

/// Inputs to the bonus `b(s, a; N) = scale · 4H √(S L / max{1, N})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BonusParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub delta: f64,
    pub planned_total_episodes: usize,
    /// Multiplier on the bonus; 1 gives the textbook width.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl BonusParams {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        delta: f64,
        planned_total_episodes: usize,
    ) -> Result<Self> {
        let p = BonusParams {
            num_states,
            num_actions,
            horizon,
            delta,
            planned_total_episodes,
            scale: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.planned_total_episodes == 0 {
            return Err(Error::Config("planned_total_episodes must be at least 1".into()));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::Config(format!("bonus scale must be nonnegative, got {}", self.scale)));
        }
        Ok(())
    }
}

/// `L = ln(5 S A H N / δ)`.
pub fn log_term(params: &BonusParams) -> f64 {
    let product = 5.0
        * params.num_states as f64
        * params.num_actions as f64
        * params.horizon as f64
        * params.planned_total_episodes as f64;
    (product / params.delta).ln()
}

/// Bonus for a pair visited `visits` times, given a precomputed `L`.
pub fn bonus_with_log(visits: u64, log_l: f64, params: &BonusParams) -> f64 {
    let n = visits.max(1) as f64;
    params.scale * 4.0 * params.horizon as f64 * (params.num_states as f64 * log_l / n).sqrt()
}

pub fn bonus(s: usize, a: usize, counts: &Counts, params: &BonusParams) -> f64 {
    bonus_with_log(counts.visits(s, a), log_term(params), params)
}

/// Per-pair bonus values `b[s][a]` consumed by the planners.
#[derive(Clone, Debug, PartialEq)]
pub struct BonusTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl BonusTable {
    pub fn from_counts(counts: &Counts, params: &BonusParams) -> Self {
        let log_l = log_term(params);
        BonusTable {
            num_actions: counts.num_actions,
            values: counts
                .visits
                .iter()
                .map(|&n| bonus_with_log(n, log_l, params))
                .collect(),
        }
    }

    /// The same bonus for every pair.
    pub fn constant(num_states: usize, num_actions: usize, value: f64) -> Self {
        BonusTable {
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }
}
