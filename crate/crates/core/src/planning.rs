//! Bonus-shifted value iteration on the empirical model.
//!
//! Three backward inductions share one recursion
//! `Q[t] = (R̂ ± b) + γ · P̂ · V[t+1]` with `Q[H-1] = 0`:
//!
//! * [`optimistic_plan`] adds the bonus and maximises (the UCB policy),
//! * [`conservative_plan`] subtracts it and maximises (the baseline policy
//!   and its lower bound),
//! * [`optimistic_eval`] adds it but follows a fixed policy (an upper bound
//!   on that policy's value).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{BonusParams, BonusTable, Counts, EmpiricalModel};
use crate::mdp::{argmax, DeterministicPolicy, QTable, ValueTable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub gamma: f64,
    /// Clip every Q value into `[0, H]`.
    pub clip: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            gamma: 1.0,
            clip: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerOutput {
    pub q: QTable,
    pub v: ValueTable,
    pub policy: DeterministicPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    pub q: QTable,
    pub v: ValueTable,
}

#[derive(Clone, Copy)]
enum Shift {
    Add,
    Subtract,
}

fn backup(
    model: &EmpiricalModel,
    bonus: &BonusTable,
    horizon: usize,
    cfg: &PlanConfig,
    shift: Shift,
    policy: Option<&DeterministicPolicy>,
) -> (QTable, ValueTable) {
    let (s_n, a_n) = (model.num_states(), model.num_actions());
    let cap = horizon as f64;
    let mut q = QTable::zeros(horizon, s_n, a_n);
    let mut v = ValueTable::zeros(horizon, s_n);
    for t in (0..horizon.saturating_sub(1)).rev() {
        for s in 0..s_n {
            for a in 0..a_n {
                let next: f64 = model
                    .p_hat(s, a)
                    .iter()
                    .zip(v.step(t + 1))
                    .map(|(p, x)| p * x)
                    .sum();
                let r = match shift {
                    Shift::Add => model.r_hat(s, a) + bonus.get(s, a),
                    Shift::Subtract => model.r_hat(s, a) - bonus.get(s, a),
                };
                let mut value = r + cfg.gamma * next;
                if cfg.clip {
                    value = value.clamp(0.0, cap);
                }
                q.set(t, s, a, value);
            }
            let chosen = match policy {
                Some(pi) => pi.action(t, s),
                None => argmax(q.actions(t, s)),
            };
            v.set(t, s, q.get(t, s, chosen));
        }
    }
    (q, v)
}

fn check_dims(model: &EmpiricalModel, counts: &Counts, params: &BonusParams) -> Result<()> {
    if model.num_states() != counts.num_states()
        || model.num_actions() != counts.num_actions()
        || params.num_states != counts.num_states()
        || params.num_actions != counts.num_actions()
    {
        return Err(Error::Dimension("model, counts and bonus params disagree on S or A".into()));
    }
    params.validate()
}

/// Optimistic value iteration with an explicit bonus table.
pub fn optimistic_plan_with(
    model: &EmpiricalModel,
    bonus: &BonusTable,
    horizon: usize,
    cfg: &PlanConfig,
) -> PlannerOutput {
    let (q, v) = backup(model, bonus, horizon, cfg, Shift::Add, None);
    let policy = DeterministicPolicy::greedy(&q);
    PlannerOutput { q, v, policy }
}

/// Conservative (bonus-subtracted) value iteration with an explicit bonus
/// table.
pub fn conservative_plan_with(
    model: &EmpiricalModel,
    bonus: &BonusTable,
    horizon: usize,
    cfg: &PlanConfig,
) -> PlannerOutput {
    let (q, v) = backup(model, bonus, horizon, cfg, Shift::Subtract, None);
    let policy = DeterministicPolicy::greedy(&q);
    PlannerOutput { q, v, policy }
}

/// Optimistic evaluation of `policy` with an explicit bonus table.
pub fn optimistic_eval_with(
    model: &EmpiricalModel,
    bonus: &BonusTable,
    policy: &DeterministicPolicy,
    cfg: &PlanConfig,
) -> Result<EvalOutput> {
    if policy.num_states() != model.num_states() {
        return Err(Error::Dimension("policy and model disagree on S".into()));
    }
    if policy.as_slice().iter().any(|&a| a >= model.num_actions()) {
        return Err(Error::Dimension("policy action out of range for the model".into()));
    }
    let (q, v) = backup(model, bonus, policy.horizon(), cfg, Shift::Add, Some(policy));
    Ok(EvalOutput { q, v })
}

/// UCB planning: greedy policy of `R̂ + b` value iteration.
pub fn optimistic_plan(
    model: &EmpiricalModel,
    counts: &Counts,
    params: &BonusParams,
    cfg: &PlanConfig,
) -> Result<PlannerOutput> {
    check_dims(model, counts, params)?;
    let bonus = BonusTable::from_counts(counts, params);
    Ok(optimistic_plan_with(model, &bonus, params.horizon, cfg))
}

/// Pessimistic planning: greedy policy of `R̂ − b` value iteration.
pub fn conservative_plan(
    model: &EmpiricalModel,
    counts: &Counts,
    params: &BonusParams,
    cfg: &PlanConfig,
) -> Result<PlannerOutput> {
    check_dims(model, counts, params)?;
    let bonus = BonusTable::from_counts(counts, params);
    Ok(conservative_plan_with(model, &bonus, params.horizon, cfg))
}

pub fn optimistic_eval(
    model: &EmpiricalModel,
    counts: &Counts,
    params: &BonusParams,
    policy: &DeterministicPolicy,
    cfg: &PlanConfig,
) -> Result<EvalOutput> {
    check_dims(model, counts, params)?;
    if policy.horizon() != params.horizon {
        return Err(Error::Dimension("policy horizon differs from bonus params".into()));
    }
    let bonus = BonusTable::from_counts(counts, params);
    optimistic_eval_with(model, &bonus, policy, cfg)
}

/// Checks `Q̄* ≤ Q̂*` and `V̂^(π̄) ≥ V̄* ≥ Q̄*(·, a)` pointwise, where `Q̄*`,
/// `V̄*` come from `conservative`, `Q̂*` from `optimistic` and `V̂^(π̄)` from
/// `eval` of the conservative policy.
pub fn sandwich_holds(
    optimistic: &PlannerOutput,
    conservative: &PlannerOutput,
    eval: &EvalOutput,
    tol: f64,
) -> bool {
    let q_bar = &conservative.q;
    let (h, s_n, a_n) = (q_bar.horizon(), q_bar.num_states(), q_bar.num_actions());
    for t in 0..h {
        for s in 0..s_n {
            let v_bar = conservative.v.get(t, s);
            if eval.v.get(t, s) + tol < v_bar {
                return false;
            }
            for a in 0..a_n {
                let lo = q_bar.get(t, s, a);
                if lo > optimistic.q.get(t, s, a) + tol || lo > v_bar + tol {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_random_ergodic_mdp, RandomMdpParams};
    use crate::mdp::{exact_optimal, exact_policy_eval, TabularMdp};
    use proptest::prelude::*;

    fn small_mdp(seed: u64) -> TabularMdp {
        let mut p = RandomMdpParams::new(3, 2, 5, 0.05, seed);
        p.enforce_diameter = false;
        build_random_ergodic_mdp(&p).unwrap()
    }

    #[test]
    fn bonus_free_reductions() {
        for seed in 0..5 {
            let mdp = small_mdp(seed);
            let model = EmpiricalModel::from_mdp(&mdp);
            let zero = BonusTable::constant(3, 2, 0.0);
            let cfg = PlanConfig::default();
            let (v_star, q_star, pi_star) = exact_optimal(&mdp);
            let opt = optimistic_plan_with(&model, &zero, 5, &cfg);
            let cons = conservative_plan_with(&model, &zero, 5, &cfg);
            assert!(opt.q.max_abs_diff(&q_star) < 1e-9);
            assert!(opt.v.max_abs_diff(&v_star) < 1e-9);
            assert!(cons.q.max_abs_diff(&q_star) < 1e-9);
            assert_eq!(opt.policy, pi_star);
            assert_eq!(cons.policy, pi_star);
            let pi = DeterministicPolicy::constant(5, 3, 1);
            let (v, q) = exact_policy_eval(&mdp, &pi).unwrap();
            let ev = optimistic_eval_with(&model, &zero, &pi, &cfg).unwrap();
            assert!(ev.v.max_abs_diff(&v) < 1e-9);
            assert!(ev.q.max_abs_diff(&q) < 1e-9);
        }
    }

    #[test]
    fn clipping_hand_recursion() {
        let model = EmpiricalModel::from_parts(1, 1, vec![1.0], vec![0.0]).unwrap();
        let out = optimistic_plan_with(&model, &BonusTable::constant(1, 1, 10.0), 4, &PlanConfig::default());
        // one-based steps 1..=4 are zero-based 0..=3; the last is terminal
        assert_eq!(out.v.get(3, 0), 0.0);
        assert_eq!(out.v.get(2, 0), 4.0);
        assert_eq!(out.v.get(1, 0), 4.0);
        let three = optimistic_plan_with(&model, &BonusTable::constant(1, 1, 10.0), 3, &PlanConfig::default());
        assert_eq!(three.v.get(1, 0), 3.0);
        assert_eq!(three.v.get(0, 0), 3.0);
        assert_eq!(three.v.get(2, 0), 0.0);
        let unclipped = PlanConfig {
            clip: false,
            ..PlanConfig::default()
        };
        let raw = optimistic_plan_with(&model, &BonusTable::constant(1, 1, 10.0), 3, &unclipped);
        assert_eq!(raw.v.get(0, 0), 20.0);
    }

    #[test]
    fn huge_bonus_floors_conservative_values() {
        let mdp = small_mdp(3);
        let model = EmpiricalModel::from_mdp(&mdp);
        let out = conservative_plan_with(&model, &BonusTable::constant(3, 2, 6.0), 5, &PlanConfig::default());
        for t in 0..5 {
            for s in 0..3 {
                assert_eq!(out.q.actions(t, s), &[0.0, 0.0]);
                assert_eq!(out.policy.action(t, s), 0);
            }
        }
    }

    #[test]
    fn spec_level_entry_points_check_dimensions() {
        let counts = Counts::new(3, 2);
        let model = crate::estimation::empirical_model(&counts);
        let bad = BonusParams::new(4, 2, 5, 0.1, 10).unwrap();
        assert!(optimistic_plan(&model, &counts, &bad, &PlanConfig::default()).is_err());
        let good = BonusParams::new(3, 2, 5, 0.1, 10).unwrap();
        let out = conservative_plan(&model, &counts, &good, &PlanConfig::default()).unwrap();
        let pi = DeterministicPolicy::constant(6, 3, 0);
        assert!(optimistic_eval(&model, &counts, &good, &pi, &PlanConfig::default()).is_err());
        assert!(optimistic_eval(&model, &counts, &good, &out.policy, &PlanConfig::default()).is_ok());
    }

    #[test]
    fn argmax_invariant_under_constant_reward_shift() {
        // adding c to every R̂ adds c per remaining step to every Q, which
        // leaves each greedy choice unchanged when nothing is clipped
        let mdp = small_mdp(11);
        let model = EmpiricalModel::from_mdp(&mdp);
        let cfg = PlanConfig {
            clip: false,
            gamma: 1.0,
        };
        let mut counts = Counts::new(3, 2);
        counts.update(&crate::mdp::Transition { t: 0, s: 0, a: 1, r: 0.5, s_next: 1 });
        let params = BonusParams::new(3, 2, 5, 0.1, 10).unwrap().with_scale(0.01);
        let bonus = BonusTable::from_counts(&counts, &params);
        let mut p = Vec::new();
        let mut r = Vec::new();
        for s in 0..3 {
            for a in 0..2 {
                p.extend_from_slice(model.p_hat(s, a));
                r.push(model.r_hat(s, a) + 0.37);
            }
        }
        let shifted = EmpiricalModel::from_parts(3, 2, p, r).unwrap();
        assert_eq!(
            optimistic_plan_with(&model, &bonus, 5, &cfg).policy,
            optimistic_plan_with(&shifted, &bonus, 5, &cfg).policy
        );
        assert_eq!(
            conservative_plan_with(&model, &bonus, 5, &cfg).policy,
            conservative_plan_with(&shifted, &bonus, 5, &cfg).policy
        );
    }

    proptest! {
        #[test]
        fn sandwich_from_random_data(
            seed in 0u64..1000,
            n_steps in 0usize..200,
            scale in prop_oneof![Just(0.0), 0.0f64..0.05, 0.05f64..2.0],
            clip in any::<bool>(),
        ) {
            let mdp = small_mdp(seed % 7);
            let mut counts = Counts::new(3, 2);
            let mut rng = crate::rng::seeded(seed, 1);
            let mut done = 0;
            let mut k = 0;
            while done < n_steps {
                use rand::Rng;
                let acts: Vec<usize> = (0..5).map(|_| rng.gen_range(0..2)).collect();
                let ro = crate::mdp::sample_rollout(&mdp, k, |t, _, _| acts[t], &mut rng).unwrap();
                counts.add_rollout(&ro);
                done += 5;
                k += 1;
            }
            let params = BonusParams::new(3, 2, 5, 0.1, 100).unwrap().with_scale(scale);
            let cfg = PlanConfig { gamma: 1.0, clip };
            let model = crate::estimation::empirical_model(&counts);
            let opt = optimistic_plan(&model, &counts, &params, &cfg).unwrap();
            let cons = conservative_plan(&model, &counts, &params, &cfg).unwrap();
            let eval = optimistic_eval(&model, &counts, &params, &cons.policy, &cfg).unwrap();
            prop_assert!(sandwich_holds(&opt, &cons, &eval, 1e-9));
            for t in 0..5 {
                for s in 0..3 {
                    prop_assert!(opt.v.get(t, s) + 1e-12 >= cons.v.get(t, s));
                    prop_assert_eq!(opt.v.get(t, s), opt.q.get(t, s, opt.policy.action(t, s)));
                    prop_assert_eq!(eval.v.get(t, s), eval.q.get(t, s, cons.policy.action(t, s)));
                    if clip {
                        prop_assert!((0.0..=5.0).contains(&opt.v.get(t, s)));
                        prop_assert!((0.0..=5.0).contains(&cons.v.get(t, s)));
                    }
                }
            }
            // deterministic
            let again = optimistic_plan(&model, &counts, &params, &cfg).unwrap();
            prop_assert_eq!(again, opt);
        }
    }
}
