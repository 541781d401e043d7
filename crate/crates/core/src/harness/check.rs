//! Computable checks of the two modelling assumptions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{
    exact_optimal, max_expected_hitting_time, policy_gap, reachability_diameter, DeterministicPolicy, HittingTime,
    TabularMdp, DEFAULT_HITTING_CAP,
};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Worst-case diameter `Υ`.
    pub upsilon: HittingTime,
    /// Worst-case hitting time of each target state.
    pub per_target: Vec<HittingTime>,
    /// `H / 2`.
    pub upsilon_bound: f64,
    pub diameter_ok: bool,
    /// Best-case (communicating) diameter, for comparison.
    pub reachability_diameter: HittingTime,
    pub eta: f64,
    /// `2 · policy_gap` of the optimal policy.
    pub eta_min_optimal: f64,
    pub random_policies: usize,
    pub eta_min_random_max: f64,
    pub eta_min_random_mean: f64,
    /// `η ≥ eta_min_optimal`.
    pub single_step_ok: bool,
}

impl CheckReport {
    pub fn passes(&self) -> bool {
        self.diameter_ok && self.single_step_ok
    }
}

pub const DEFAULT_RANDOM_POLICIES: usize = 100;

fn random_policy<R: Rng>(mdp: &TabularMdp, rng: &mut R) -> DeterministicPolicy {
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let actions = (0..h * s_n).map(|_| rng.gen_range(0..a_n)).collect();
    DeterministicPolicy::new(h, s_n, a_n, actions).expect("actions drawn in range")
}

/// Diameter and single-step budget checks for `mdp` at budget `eta`.
///
/// `η_min` can only be sampled for non-optimal policies: the report covers
/// the optimal policy and `random_policies` uniformly drawn deterministic
/// policies.
pub fn check_env(mdp: &TabularMdp, eta: f64, random_policies: usize, seed: u64) -> Result<CheckReport> {
    let per_target: Vec<HittingTime> = (0..mdp.num_states())
        .map(|target| max_expected_hitting_time(mdp, target, DEFAULT_HITTING_CAP))
        .collect();
    let upsilon = per_target
        .iter()
        .copied()
        .fold(HittingTime::Finite(0.0), HittingTime::max);
    let bound = mdp.horizon() as f64 / 2.0;

    let (_, _, optimal) = exact_optimal(mdp);
    let eta_min_optimal = 2.0 * policy_gap(mdp, &optimal)?;
    let mut rng = seeded(seed, 2);
    let mut etas = Vec::with_capacity(random_policies);
    for _ in 0..random_policies {
        etas.push(2.0 * policy_gap(mdp, &random_policy(mdp, &mut rng))?);
    }
    let eta_min_random_max = etas.iter().copied().fold(0.0, f64::max);
    let eta_min_random_mean = if etas.is_empty() {
        0.0
    } else {
        etas.iter().sum::<f64>() / etas.len() as f64
    };

    Ok(CheckReport {
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        horizon: mdp.horizon(),
        upsilon,
        per_target,
        upsilon_bound: bound,
        diameter_ok: upsilon.is_at_most(bound),
        reachability_diameter: reachability_diameter(mdp, DEFAULT_HITTING_CAP),
        eta,
        eta_min_optimal,
        random_policies,
        eta_min_random_max,
        eta_min_random_mean,
        single_step_ok: eta >= eta_min_optimal,
    })
}

/// Budgets bracketing `η_min`: half of it, 10% above it and twice it.
pub fn default_eta_grid(eta_min: f64) -> Vec<f64> {
    if eta_min > 0.0 {
        vec![0.5 * eta_min, 1.1 * eta_min, 2.0 * eta_min]
    } else {
        vec![0.12]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_random_ergodic_mdp, RandomMdpParams};

    #[test]
    fn single_action_has_zero_eta_min() {
        let mdp = TabularMdp::new(2, 1, 5, 0, vec![0.5, 0.5, 0.5, 0.5], vec![0.2, 0.9]).unwrap();
        let r = check_env(&mdp, 0.1, 20, 0).unwrap();
        assert_eq!(r.eta_min_optimal, 0.0);
        assert_eq!(r.eta_min_random_max, 0.0);
        assert!(r.single_step_ok);
        assert!((r.upsilon.finite().unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn trap_is_unbounded() {
        // state 1 absorbs every action
        let p = vec![0.5, 0.5, 0.5, 0.5, 0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::new(2, 2, 6, 0, p, vec![0.0; 4]).unwrap();
        let r = check_env(&mdp, 0.1, 5, 0).unwrap();
        assert_eq!(r.upsilon, HittingTime::Unbounded);
        assert!(!r.diameter_ok && !r.passes());
    }

    #[test]
    fn deterministic_and_json() {
        let mdp = build_random_ergodic_mdp(&RandomMdpParams::new(4, 2, 12, 0.05, 3)).unwrap();
        let a = check_env(&mdp, 0.5, 30, 9).unwrap();
        let b = check_env(&mdp, 0.5, 30, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.diameter_ok);
        assert!(a.eta_min_random_max >= a.eta_min_random_mean);
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<CheckReport>(&text).unwrap(), a);
    }

    #[test]
    fn eta_grid_brackets() {
        let g = default_eta_grid(0.2);
        assert!(g[0] < 0.2 && g[2] > 0.2);
        assert_eq!(default_eta_grid(0.0), vec![0.12]);
    }
}
