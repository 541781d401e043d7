//! Benchmark environments and warm-start data.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{sample_rollout, worst_case_diameter, Rollout, TabularMdp, DEFAULT_HITTING_CAP};
use crate::rng::{seeded, SimRng};

/// Single-product inventory control with lost sales.
///
/// States are stock levels `0..=capacity`, actions are order quantities
/// `0..=capacity` clamped to the free space `capacity - s`. Demand is
/// uniform on `0..=demand_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InventoryParams {
    pub capacity: usize,
    pub fixed_order_cost: f64,
    pub unit_order_cost: f64,
    pub holding_cost: f64,
    pub revenue: f64,
    pub demand_max: usize,
    pub horizon: usize,
    pub initial_state: usize,
}

impl Default for InventoryParams {
    fn default() -> Self {
        InventoryParams {
            capacity: 5,
            fixed_order_cost: 2.0,
            unit_order_cost: 2.0,
            holding_cost: 1.0,
            revenue: 8.0,
            demand_max: 5,
            horizon: 20,
            initial_state: 0,
        }
    }
}

impl InventoryParams {
    fn validate(&self) -> Result<()> {
        if self.capacity < 1 || self.demand_max < 1 {
            return Err(Error::Config("capacity and demand_max must be at least 1".into()));
        }
        let costs = [
            self.fixed_order_cost,
            self.unit_order_cost,
            self.holding_cost,
            self.revenue,
        ];
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Config("costs and revenue must be finite and nonnegative".into()));
        }
        if self.initial_state > self.capacity {
            return Err(Error::Config("initial_state exceeds capacity".into()));
        }
        Ok(())
    }

    /// Order quantity actually placed in stock level `s`.
    pub fn clamp_order(&self, s: usize, a: usize) -> usize {
        a.min(self.capacity - s)
    }

    pub fn order_cost(&self, quantity: usize) -> f64 {
        if quantity == 0 {
            0.0
        } else {
            self.fixed_order_cost + self.unit_order_cost * quantity as f64
        }
    }

    /// Unnormalised reward `-O(a) - h(s + a) + f(s + a - s')`.
    pub fn raw_reward(&self, s: usize, a_clamped: usize, s_next: usize) -> f64 {
        let stock = s + a_clamped;
        let sold = stock - s_next;
        -self.order_cost(a_clamped) - self.holding_cost * stock as f64 + self.revenue * sold as f64
    }

    pub fn next_state(&self, s: usize, a_clamped: usize, demand: usize) -> usize {
        (s + a_clamped).saturating_sub(demand)
    }

    /// Exact `(min, max)` of the raw reward over every reachable
    /// `(s, a, s')`.
    pub fn raw_reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..=self.capacity {
            for a in 0..=self.capacity - s {
                for d in 0..=self.demand_max {
                    let r = self.raw_reward(s, a, self.next_state(s, a, d));
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        (lo, hi)
    }
}

/// Builds the inventory MDP with expected, affinely normalised rewards.
pub fn build_inventory_mdp(params: &InventoryParams) -> Result<TabularMdp> {
    params.validate()?;
    let n = params.capacity + 1;
    let (lo, hi) = params.raw_reward_range();
    let span = hi - lo;
    let normalize = |r: f64| if span > 0.0 { (r - lo) / span } else { 0.0 };
    let outcomes = (params.demand_max + 1) as f64;

    let mut transition = vec![0.0; n * n * n];
    let mut reward = vec![0.0; n * n];
    for s in 0..n {
        for a in 0..n {
            let placed = params.clamp_order(s, a);
            let mut hits = vec![0usize; n];
            let mut total = 0.0;
            for d in 0..=params.demand_max {
                let y = params.next_state(s, placed, d);
                hits[y] += 1;
                total += normalize(params.raw_reward(s, placed, y));
            }
            for (y, &k) in hits.iter().enumerate() {
                transition[(s * n + a) * n + y] = k as f64 / outcomes;
            }
            reward[s * n + a] = (total / outcomes).clamp(0.0, 1.0);
        }
    }
    TabularMdp::new(n, n, params.horizon, params.initial_state, transition, reward)
}

/// Random MDP with full-support transitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMdpParams {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub min_transition_prob: f64,
    pub seed: u64,
    /// Concentration of the symmetric Dirichlet for transition rows.
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
    /// Retry until the worst-case diameter is at most `H / 2`.
    #[serde(default = "default_true")]
    pub enforce_diameter: bool,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_retries() -> usize {
    200
}

impl RandomMdpParams {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, floor: f64, seed: u64) -> Self {
        RandomMdpParams {
            num_states,
            num_actions,
            horizon,
            min_transition_prob: floor,
            seed,
            dirichlet_alpha: default_alpha(),
            enforce_diameter: true,
            max_retries: default_retries(),
        }
    }
}

fn sample_random_mdp(params: &RandomMdpParams, rng: &mut SimRng) -> Result<TabularMdp> {
    let (s_n, a_n) = (params.num_states, params.num_actions);
    let gamma = Gamma::new(params.dirichlet_alpha, 1.0)
        .map_err(|e| Error::Config(format!("dirichlet_alpha: {e}")))?;
    let mut transition = Vec::with_capacity(s_n * a_n * s_n);
    for _ in 0..s_n * a_n {
        let draws: Vec<f64> = (0..s_n).map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE)).collect();
        let total: f64 = draws.iter().sum();
        let floored: Vec<f64> = draws
            .iter()
            .map(|x| (x / total).max(params.min_transition_prob))
            .collect();
        let total: f64 = floored.iter().sum();
        transition.extend(floored.iter().map(|x| x / total));
    }
    let reward = (0..s_n * a_n).map(|_| rng.gen::<f64>()).collect();
    TabularMdp::new(s_n, a_n, params.horizon, 0, transition, reward)
}

/// Draws a random ergodic MDP, retrying with derived seeds until the
/// worst-case diameter is at most `H / 2` (when enforced).
pub fn build_random_ergodic_mdp(params: &RandomMdpParams) -> Result<TabularMdp> {
    if params.num_states == 0 || params.num_actions == 0 {
        return Err(Error::Config("S and A must be positive".into()));
    }
    let floor = params.min_transition_prob;
    if !(0.0..=1.0).contains(&floor) || floor * params.num_states as f64 > 1.0 {
        return Err(Error::Config(format!(
            "min_transition_prob {floor} is infeasible for S = {}",
            params.num_states
        )));
    }
    let bound = params.horizon as f64 / 2.0;
    for attempt in 0..=params.max_retries {
        let mut rng = seeded(params.seed, attempt as u64);
        let mdp = sample_random_mdp(params, &mut rng)?;
        if !params.enforce_diameter || worst_case_diameter(&mdp, DEFAULT_HITTING_CAP).is_at_most(bound) {
            return Ok(mdp);
        }
    }
    Err(Error::Generation(format!(
        "no MDP with worst-case diameter <= {bound} after {} attempts",
        params.max_retries + 1
    )))
}

/// `n_episodes` rollouts of the uniform-random policy.
pub fn warm_start_dataset<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    n_episodes: usize,
    rng: &mut R,
) -> Vec<Rollout> {
    let (a_n, h) = (mdp.num_actions(), mdp.horizon());
    (0..n_episodes)
        .map(|k| {
            // actions do not depend on the state, so draw them up front
            let actions: Vec<usize> = (0..h).map(|_| rng.gen_range(0..a_n)).collect();
            sample_rollout(mdp, k, |t, _, _| actions[t], rng).expect("uniform actions are valid")
        })
        .collect()
}

/// Environment description accepted in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Inventory(InventoryParams),
    RandomErgodic(RandomMdpParams),
    /// An explicit MDP in the tabular JSON format.
    Tabular { mdp: TabularMdp },
}

impl EnvSpec {
    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            EnvSpec::Inventory(p) => build_inventory_mdp(p),
            EnvSpec::RandomErgodic(p) => build_random_ergodic_mdp(p),
            EnvSpec::Tabular { mdp } => Ok(mdp.clone()),
        }
    }

    /// Parses either an environment spec (`{"kind": ...}`) or a bare MDP
    /// document.
    pub fn from_json(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        if value.get("kind").is_some() {
            Ok(serde_json::from_value(value)?)
        } else {
            let mdp = serde_json::from_value(value).map_err(|e| Error::InvalidModel(e.to_string()))?;
            Ok(EnvSpec::Tabular { mdp })
        }
    }
}
