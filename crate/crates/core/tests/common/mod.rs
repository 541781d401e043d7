//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the library's solvers.
#![allow(dead_code)]

use rand::Rng;
use unifconserv::mdp::{DeterministicPolicy, TabularMdp};
use unifconserv::rng::seeded;

/// Random MDP with `S ∈ 1..=max_s`, `A ∈ 1..=max_a`, `H ∈ 2..=max_h`,
/// arbitrary (possibly sparse) transition rows and rewards in `[0, 1]`.
pub fn small_mdp(seed: u64, max_s: usize, max_a: usize, max_h: usize) -> TabularMdp {
    let mut rng = seeded(seed, 7);
    let s_n = rng.gen_range(1..=max_s);
    let a_n = rng.gen_range(1..=max_a);
    let h = rng.gen_range(2..=max_h);
    let mut p = Vec::with_capacity(s_n * a_n * s_n);
    for _ in 0..s_n * a_n {
        let mut row: Vec<f64> = (0..s_n)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        if row.iter().all(|&x| x == 0.0) {
            row[rng.gen_range(0..s_n)] = 1.0;
        }
        let total: f64 = row.iter().sum();
        p.extend(row.iter().map(|x| x / total));
    }
    let r = (0..s_n * a_n).map(|_| rng.gen::<f64>()).collect();
    let s1 = rng.gen_range(0..s_n);
    TabularMdp::new(s_n, a_n, h, s1, p, r).unwrap()
}

/// Every deterministic Markov policy, as flat `[t * S + s]` action tables.
pub fn all_policies(mdp: &TabularMdp) -> Vec<DeterministicPolicy> {
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let slots = h * s_n;
    let total = a_n.pow(slots as u32);
    (0..total)
        .map(|mut code| {
            let actions = (0..slots)
                .map(|_| {
                    let a = code % a_n;
                    code /= a_n;
                    a
                })
                .collect();
            DeterministicPolicy::new(h, s_n, a_n, actions).unwrap()
        })
        .collect()
}

/// Expected return of starting at `(t, s)`, taking `first` (or the policy's
/// action) and then following `policy`, by summing over every state path
/// to the horizon. The action at the last step carries no reward.
pub fn enumerate_value(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    t: usize,
    s: usize,
    first: Option<usize>,
) -> f64 {
    let h = mdp.horizon();
    #[allow(clippy::too_many_arguments)]
    fn walk(
        mdp: &TabularMdp,
        policy: &DeterministicPolicy,
        t: usize,
        s: usize,
        first: Option<usize>,
        prob: f64,
        acc: f64,
        h: usize,
    ) -> f64 {
        if t == h - 1 {
            return prob * acc;
        }
        let a = first.unwrap_or_else(|| policy.action(t, s));
        let reward = mdp.reward(s, a);
        let mut total = 0.0;
        for (next, &p) in mdp.next_state_probs(s, a).iter().enumerate() {
            if p > 0.0 {
                total += walk(mdp, policy, t + 1, next, None, prob * p, acc + reward, h);
            }
        }
        total
    }
    walk(mdp, policy, t, s, first, 1.0, 0.0, h)
}

/// `(V, Q)` of `policy` indexed `[t][s]` and `[t][s][a]`.
pub fn enumerate_policy(mdp: &TabularMdp, policy: &DeterministicPolicy) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let v = (0..h)
        .map(|t| (0..s_n).map(|s| enumerate_value(mdp, policy, t, s, None)).collect())
        .collect();
    let q = (0..h)
        .map(|t| {
            (0..s_n)
                .map(|s| (0..a_n).map(|a| enumerate_value(mdp, policy, t, s, Some(a))).collect())
                .collect()
        })
        .collect();
    (v, q)
}

/// Optimal `(V*, Q*)` as pointwise maxima over every deterministic policy.
pub fn brute_force_optimal(mdp: &TabularMdp) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut v = vec![vec![f64::NEG_INFINITY; s_n]; h];
    let mut q = vec![vec![vec![f64::NEG_INFINITY; a_n]; s_n]; h];
    for policy in all_policies(mdp) {
        let (pv, pq) = enumerate_policy(mdp, &policy);
        for t in 0..h {
            for s in 0..s_n {
                v[t][s] = v[t][s].max(pv[t][s]);
                for a in 0..a_n {
                    q[t][s][a] = q[t][s][a].max(pq[t][s][a]);
                }
            }
        }
    }
    (v, q)
}

/// Uniformly random deterministic policy.
pub fn random_policy(mdp: &TabularMdp, seed: u64) -> DeterministicPolicy {
    let mut rng = seeded(seed, 11);
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let actions = (0..h * s_n).map(|_| rng.gen_range(0..a_n)).collect();
    DeterministicPolicy::new(h, s_n, a_n, actions).unwrap()
}

/// Largest absolute difference between a library table and an oracle
/// table.
pub fn max_diff_v(lib: &unifconserv::mdp::ValueTable, oracle: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, row) in oracle.iter().enumerate() {
        for (s, &x) in row.iter().enumerate() {
            worst = worst.max((lib.get(t, s) - x).abs());
        }
    }
    worst
}

pub fn max_diff_q(lib: &unifconserv::mdp::QTable, oracle: &[Vec<Vec<f64>>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, rows) in oracle.iter().enumerate() {
        for (s, row) in rows.iter().enumerate() {
            for (a, &x) in row.iter().enumerate() {
                worst = worst.max((lib.get(t, s, a) - x).abs());
            }
        }
    }
    worst
}

/// Worst-case expected hitting time of `target`, maximised over start
/// states and stationary deterministic policies. Each policy's hitting
/// times solve `(I - P_π) h = 1` off the target; `None` when some policy
/// can never reach the target from some state.
pub fn worst_hitting_time(mdp: &TabularMdp, target: usize) -> Option<f64> {
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let mut worst: f64 = 0.0;
    for code in 0..a_n.pow(s_n as u32) {
        let pi: Vec<usize> = (0..s_n).map(|s| (code / a_n.pow(s as u32)) % a_n).collect();
        // backward reachability of the target under pi
        let mut reaches = vec![false; s_n];
        reaches[target] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..s_n {
                if !reaches[s]
                    && mdp
                        .next_state_probs(s, pi[s])
                        .iter()
                        .enumerate()
                        .any(|(n, &p)| p > 0.0 && reaches[n])
                {
                    reaches[s] = true;
                    changed = true;
                }
            }
        }
        if reaches.iter().any(|r| !r) {
            return None;
        }
        let others: Vec<usize> = (0..s_n).filter(|&s| s != target).collect();
        let n = others.len();
        let mut m = vec![vec![0.0; n + 1]; n];
        for (i, &s) in others.iter().enumerate() {
            let row = mdp.next_state_probs(s, pi[s]);
            for (j, &x) in others.iter().enumerate() {
                m[i][j] = if i == j { 1.0 } else { 0.0 } - row[x];
            }
            m[i][n] = 1.0;
        }
        let h = solve(m);
        worst = worst.max(h.iter().copied().fold(0.0, f64::max));
    }
    Some(worst)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                let pivot_row = m[col].clone();
                for (x, p) in m[row].iter_mut().zip(&pivot_row).skip(col) {
                    *x -= f * p;
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}
