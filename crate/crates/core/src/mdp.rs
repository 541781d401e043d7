//! Finite-horizon tabular MDPs and their exact dynamic-programming oracles.
//!
//! The oracles here work on the true model and serve as ground truth for
//! regret and for the violation monitor. Steps are zero-based and the last
//! step (`H - 1`) carries zero value (see the crate docs).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_categorical;

const PROB_TOL: f64 = 1e-9;

/// Default iteration cap for [`max_expected_hitting_time`].
pub const DEFAULT_HITTING_CAP: usize = 10_000;

/// A finite-horizon MDP with stationary dynamics and deterministic rewards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    /// `P[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `R[s][a]`, flattened.
    reward: Vec<f64>,
}

/// JSON wire form: `{"S","A","H","s1","P":[[[..]]],"R":[[..]]}`.
#[derive(Serialize, Deserialize)]
struct MdpDocument {
    #[serde(rename = "S")]
    num_states: usize,
    #[serde(rename = "A")]
    num_actions: usize,
    #[serde(rename = "H")]
    horizon: usize,
    s1: usize,
    #[serde(rename = "P")]
    transition: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    reward: Vec<Vec<f64>>,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (s, a) = (doc.num_states, doc.num_actions);
        if doc.transition.len() != s || doc.transition.iter().any(|row| row.len() != a) {
            return Err(Error::InvalidModel(format!("P must have shape [{s}][{a}][{s}]")));
        }
        if doc.reward.len() != s || doc.reward.iter().any(|row| row.len() != a) {
            return Err(Error::InvalidModel(format!("R must have shape [{s}][{a}]")));
        }
        let transition = doc.transition.into_iter().flatten().flatten().collect();
        let reward = doc.reward.into_iter().flatten().collect();
        TabularMdp::new(s, a, doc.horizon, doc.s1, transition, reward)
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        let (s, a) = (mdp.num_states, mdp.num_actions);
        let transition = (0..s)
            .map(|x| (0..a).map(|u| mdp.next_state_probs(x, u).to_vec()).collect())
            .collect();
        let reward = (0..s).map(|x| mdp.reward[x * a..(x + 1) * a].to_vec()).collect();
        MdpDocument {
            num_states: s,
            num_actions: a,
            horizon: mdp.horizon,
            s1: mdp.initial_state,
            transition,
            reward,
        }
    }
}

impl TabularMdp {
    /// Builds a validated MDP from flat `P[s][a][s']` and `R[s][a]` arrays.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_state: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel("S and A must be positive".into()));
        }
        if horizon < 2 {
            return Err(Error::InvalidModel(format!("horizon must be at least 2, got {horizon}")));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidModel(format!(
                "initial state {initial_state} out of range for S = {num_states}"
            )));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::InvalidModel("transition tensor has the wrong length".into()));
        }
        if reward.len() != num_states * num_actions {
            return Err(Error::InvalidModel("reward matrix has the wrong length".into()));
        }
        for (i, row) in transition.chunks(num_states).enumerate() {
            let (s, a) = (i / num_actions, i % num_actions);
            if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(Error::InvalidModel(format!("P[{s}][{a}] has invalid entry {p}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidModel(format!("P[{s}][{a}] sums to {total}, not 1")));
            }
        }
        for (i, &r) in reward.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                let (s, a) = (i / num_actions, i % num_actions);
                return Err(Error::InvalidModel(format!("R[{s}][{a}] = {r} lies outside [0, 1]")));
            }
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            horizon,
            initial_state,
            transition,
            reward,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// `P[s][a][·]`.
    pub fn next_state_probs(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    /// Same dynamics and rewards with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        TabularMdp::new(
            self.num_states,
            self.num_actions,
            horizon,
            self.initial_state,
            self.transition.clone(),
            self.reward.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and validates an MDP document. Malformed JSON is a `Json`
    /// error; well-formed JSON that is not a valid MDP is `InvalidModel`.
    pub fn from_json(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        serde_json::from_value(value).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    fn expect_value(&self, s: usize, a: usize, next: &[f64]) -> f64 {
        self.next_state_probs(s, a)
            .iter()
            .zip(next)
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// Time-indexed state values `V[t][s]`, `t` in `0..H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    num_states: usize,
    data: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        ValueTable {
            horizon,
            num_states,
            data: vec![0.0; horizon * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.data[t * self.num_states + s]
    }

    pub fn set(&mut self, t: usize, s: usize, v: f64) {
        self.data[t * self.num_states + s] = v;
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.num_states..(t + 1) * self.num_states]
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

/// Time-indexed action values `Q[t][s][a]`, `t` in `0..H`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl QTable {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        QTable {
            horizon,
            num_states,
            num_actions,
            data: vec![0.0; horizon * num_states * num_actions],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.data[(t * self.num_states + s) * self.num_actions + a]
    }

    pub fn set(&mut self, t: usize, s: usize, a: usize, q: f64) {
        self.data[(t * self.num_states + s) * self.num_actions + a] = q;
    }

    /// `Q[t][s][·]`.
    pub fn actions(&self, t: usize, s: usize) -> &[f64] {
        let start = (t * self.num_states + s) * self.num_actions;
        &self.data[start..start + self.num_actions]
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "tables differ in shape");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A deterministic Markov policy `π_t(s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy {
    horizon: usize,
    num_states: usize,
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    /// `actions` is laid out `[t][s]`. Every entry must be `< num_actions`.
    pub fn new(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        actions: Vec<usize>,
    ) -> Result<Self> {
        if actions.len() != horizon * num_states {
            return Err(Error::Dimension(format!(
                "policy needs {} entries, got {}",
                horizon * num_states,
                actions.len()
            )));
        }
        if let Some(a) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::Dimension(format!("policy action {a} >= A = {num_actions}")));
        }
        Ok(DeterministicPolicy {
            horizon,
            num_states,
            actions,
        })
    }

    /// The policy that plays `action` everywhere.
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        DeterministicPolicy {
            horizon,
            num_states,
            actions: vec![action; horizon * num_states],
        }
    }

    /// Time-independent policy from a per-state action list.
    pub fn stationary(horizon: usize, per_state: &[usize]) -> Self {
        DeterministicPolicy {
            horizon,
            num_states: per_state.len(),
            actions: per_state.repeat(horizon),
        }
    }

    /// Greedy policy of a Q table, lowest action on ties.
    pub fn greedy(q: &QTable) -> Self {
        let (h, s) = (q.horizon(), q.num_states());
        let actions = (0..h)
            .flat_map(|t| (0..s).map(move |x| (t, x)))
            .map(|(t, x)| argmax(q.actions(t, x)))
            .collect();
        DeterministicPolicy {
            horizon: h,
            num_states: s,
            actions,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn action(&self, t: usize, s: usize) -> usize {
        self.actions[t * self.num_states + s]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.actions
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.horizon != mdp.horizon() || self.num_states != mdp.num_states() {
            return Err(Error::Dimension(format!(
                "policy is {}x{} (H x S) but the MDP is {}x{}",
                self.horizon,
                self.num_states,
                mdp.horizon(),
                mdp.num_states()
            )));
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= mdp.num_actions()) {
            return Err(Error::Dimension(format!(
                "policy action {a} >= A = {}",
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

/// One observed step `(t, s, a, r, s')`. `s_next` is recorded at every
/// step, including the last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

/// Per-step bookkeeping attached by the shielded agent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepAnnotation {
    /// The optimistic policy chose this step's action.
    pub used_ucb: bool,
    /// Tracked reward deficit after this step.
    pub zeta: f64,
    /// Target state in force when the action was chosen.
    pub target: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub episode_index: usize,
    pub steps: Vec<Transition>,
    pub annotations: Vec<StepAnnotation>,
}

impl Rollout {
    /// Checks the length and chaining invariants.
    pub fn is_well_formed(&self, horizon: usize) -> bool {
        self.steps.len() == horizon
            && self.annotations.len() == horizon
            && self.steps.windows(2).all(|w| w[0].s_next == w[1].s)
    }

    /// Sum of rewards over the steps that carry value (all but the last),
    /// so that its expectation under a policy equals `V_0(s1)`.
    pub fn realized_return(&self) -> f64 {
        let n = self.steps.len().saturating_sub(1);
        self.steps[..n].iter().map(|tr| tr.r).sum()
    }
}

/// Exact `(V^π, Q^π)` by backward induction on the true model.
pub fn exact_policy_eval(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
) -> Result<(ValueTable, QTable)> {
    policy.check_against(mdp)?;
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut v = ValueTable::zeros(h, s_n);
    let mut q = QTable::zeros(h, s_n, a_n);
    for t in (0..h - 1).rev() {
        for s in 0..s_n {
            for a in 0..a_n {
                let next = mdp.expect_value(s, a, v.step(t + 1));
                q.set(t, s, a, mdp.reward(s, a) + next);
            }
            v.set(t, s, q.get(t, s, policy.action(t, s)));
        }
    }
    Ok((v, q))
}

/// Exact optimal `(V*, Q*, π*)`; `π*` breaks ties toward the lowest action.
pub fn exact_optimal(mdp: &TabularMdp) -> (ValueTable, QTable, DeterministicPolicy) {
    let (h, s_n, a_n) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut v = ValueTable::zeros(h, s_n);
    let mut q = QTable::zeros(h, s_n, a_n);
    for t in (0..h - 1).rev() {
        for s in 0..s_n {
            for a in 0..a_n {
                let next = mdp.expect_value(s, a, v.step(t + 1));
                q.set(t, s, a, mdp.reward(s, a) + next);
            }
            let best = argmax(q.actions(t, s));
            v.set(t, s, q.get(t, s, best));
        }
    }
    let policy = DeterministicPolicy::greedy(&q);
    (v, q, policy)
}

/// Samples one `H`-step rollout from the true dynamics.
///
/// `act(t, s, history)` picks the action at step `t` in state `s`, where
/// `history` holds the steps taken so far in this episode.
pub fn sample_rollout<R, F>(
    mdp: &TabularMdp,
    episode_index: usize,
    mut act: F,
    rng: &mut R,
) -> Result<Rollout>
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize, &[Transition]) -> usize,
{
    let h = mdp.horizon();
    let mut steps = Vec::with_capacity(h);
    let mut s = mdp.initial_state();
    for t in 0..h {
        let a = act(t, s, &steps);
        if a >= mdp.num_actions() {
            return Err(Error::InvalidAction {
                step: t,
                state: s,
                action: a,
                num_actions: mdp.num_actions(),
            });
        }
        let s_next = sample_categorical(mdp.next_state_probs(s, a), rng);
        steps.push(Transition {
            t,
            s,
            a,
            r: mdp.reward(s, a),
            s_next,
        });
        s = s_next;
    }
    Ok(Rollout {
        episode_index,
        annotations: vec![StepAnnotation::default(); h],
        steps,
    })
}

/// Result of a hitting-time computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HittingTime {
    Finite(f64),
    Unbounded,
}

impl HittingTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            HittingTime::Finite(v) => Some(v),
            HittingTime::Unbounded => None,
        }
    }

    /// Combines two results, keeping the larger.
    pub fn max(self, other: HittingTime) -> HittingTime {
        match (self, other) {
            (HittingTime::Finite(a), HittingTime::Finite(b)) => HittingTime::Finite(a.max(b)),
            _ => HittingTime::Unbounded,
        }
    }

    pub fn is_at_most(self, bound: f64) -> bool {
        matches!(self, HittingTime::Finite(v) if v <= bound)
    }
}

impl std::fmt::Display for HittingTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HittingTime::Finite(v) => write!(f, "{v}"),
            HittingTime::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Clone, Copy)]
enum Adversary {
    Worst,
    Best,
}

/// States from which the adversary can keep away from `target` forever:
/// for `Worst` the largest set closed under some action at every member,
/// for `Best` the states with no path to `target` under any action.
fn avoids_forever(mdp: &TabularMdp, target: usize, who: Adversary) -> Vec<bool> {
    let s_n = mdp.num_states();
    let support = |x: usize, a: usize| {
        mdp.next_state_probs(x, a)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(y, _)| y)
    };
    match who {
        Adversary::Worst => {
            let mut inside: Vec<bool> = (0..s_n).map(|x| x != target).collect();
            loop {
                let mut changed = false;
                for x in 0..s_n {
                    if inside[x] && !(0..mdp.num_actions()).any(|a| support(x, a).all(|y| inside[y])) {
                        inside[x] = false;
                        changed = true;
                    }
                }
                if !changed {
                    return inside;
                }
            }
        }
        Adversary::Best => {
            let mut reaches = vec![false; s_n];
            reaches[target] = true;
            loop {
                let mut changed = false;
                for x in 0..s_n {
                    if !reaches[x] && (0..mdp.num_actions()).any(|a| support(x, a).any(|y| reaches[y])) {
                        reaches[x] = true;
                        changed = true;
                    }
                }
                if !changed {
                    return reaches.iter().map(|r| !r).collect();
                }
            }
        }
    }
}

/// Expected hitting times of `target` under the stationary policy `pi`,
/// from `(I − P_π) u = 1` off the target.
fn policy_hitting_times(mdp: &TabularMdp, target: usize, pi: &[usize]) -> Option<Vec<f64>> {
    let s_n = mdp.num_states();
    let others: Vec<usize> = (0..s_n).filter(|&x| x != target).collect();
    let n = others.len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (i, &x) in others.iter().enumerate() {
        let row = mdp.next_state_probs(x, pi[x]);
        for (j, &y) in others.iter().enumerate() {
            m[i][j] = f64::from(u8::from(i == j)) - row[y];
        }
        m[i][n] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (x, p) in m[row].iter_mut().zip(&pivot_row).skip(col) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    let mut u = vec![0.0; s_n];
    for (i, &x) in others.iter().enumerate() {
        u[x] = m[i][n] / m[i][i];
    }
    u.iter().all(|v| v.is_finite() && *v >= 0.0).then_some(u)
}

fn pick_action(mdp: &TabularMdp, x: usize, u: &[f64], who: Adversary) -> (usize, f64) {
    let mut best = (0, mdp.expect_value(x, 0, u));
    for a in 1..mdp.num_actions() {
        let e = mdp.expect_value(x, a, u);
        let better = match who {
            Adversary::Worst => e > best.1,
            Adversary::Best => e < best.1,
        };
        if better {
            best = (a, e);
        }
    }
    best
}

/// Exact policy iteration started from the greedy policy of `u`.
fn refine_by_policy_iteration(mdp: &TabularMdp, target: usize, u: &[f64], who: Adversary) -> Option<Vec<f64>> {
    let s_n = mdp.num_states();
    let mut pi: Vec<usize> = (0..s_n).map(|x| pick_action(mdp, x, u, who).0).collect();
    for _ in 0..1000 {
        let v = policy_hitting_times(mdp, target, &pi)?;
        let mut changed = false;
        for x in (0..s_n).filter(|&x| x != target) {
            let (a, e) = pick_action(mdp, x, &v, who);
            let current = mdp.expect_value(x, pi[x], &v);
            let improves = match who {
                Adversary::Worst => e > current + 1e-12 * (1.0 + current),
                Adversary::Best => e < current - 1e-12 * (1.0 + current),
            };
            if improves {
                pi[x] = a;
                changed = true;
            }
        }
        if !changed {
            return Some(v);
        }
    }
    None
}

fn hitting_time(mdp: &TabularMdp, target: usize, cap: usize, who: Adversary) -> HittingTime {
    if avoids_forever(mdp, target, who).iter().any(|&x| x) {
        return HittingTime::Unbounded;
    }
    let s_n = mdp.num_states();
    let worst_of = |u: &[f64]| {
        (0..s_n)
            .filter(|&x| x != target)
            .map(|x| u[x])
            .fold(0.0, f64::max)
    };
    let mut u = vec![0.0; s_n];
    let mut next = vec![0.0; s_n];
    for _ in 0..cap {
        for (x, slot) in next.iter_mut().enumerate() {
            *slot = if x == target {
                0.0
            } else {
                1.0 + pick_action(mdp, x, &u, who).1
            };
        }
        let change = u
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut u, &mut next);
        if change <= 1e-10 * (1.0 + u.iter().cloned().fold(0.0, f64::max)) {
            return HittingTime::Finite(worst_of(&u));
        }
    }
    // slow mixing: finish exactly from the current iterate
    match refine_by_policy_iteration(mdp, target, &u, who) {
        Some(v) => HittingTime::Finite(worst_of(&v)),
        None => HittingTime::Unbounded,
    }
}

/// Worst case over deterministic policies and start states `s' ≠ target` of
/// the expected time to reach `target`.
///
/// [`HittingTime::Unbounded`] exactly when some policy can avoid `target`
/// forever from some state, which is decided on the transition graph.
/// Otherwise runs up to `cap` sweeps of value iteration on
/// `U(x) = 1 + max_a Σ_y P[x][a][y] U(y)` with `U(target) = 0`, then
/// finishes slow-mixing cases with exact policy iteration.
pub fn max_expected_hitting_time(mdp: &TabularMdp, target: usize, cap: usize) -> HittingTime {
    hitting_time(mdp, target, cap, Adversary::Worst)
}

/// Best case over policies of the expected time to reach `target`, maximised
/// over start states. This is the usual communicating-MDP diameter and is a
/// lower bound on [`max_expected_hitting_time`].
pub fn min_expected_hitting_time(mdp: &TabularMdp, target: usize, cap: usize) -> HittingTime {
    hitting_time(mdp, target, cap, Adversary::Best)
}

/// `Υ`: [`max_expected_hitting_time`] maximised over all targets.
pub fn worst_case_diameter(mdp: &TabularMdp, cap: usize) -> HittingTime {
    (0..mdp.num_states())
        .map(|target| max_expected_hitting_time(mdp, target, cap))
        .fold(HittingTime::Finite(0.0), HittingTime::max)
}

/// [`min_expected_hitting_time`] maximised over all targets.
pub fn reachability_diameter(mdp: &TabularMdp, cap: usize) -> HittingTime {
    (0..mdp.num_states())
        .map(|target| min_expected_hitting_time(mdp, target, cap))
        .fold(HittingTime::Finite(0.0), HittingTime::max)
}

/// Largest single-step deviation cost `max_{t,s,a} V^π_t(s) − Q^π_t(s,a)`.
///
/// A budget `η` admits `policy` under the single-step condition when
/// `η ≥ 2 · policy_gap`.
pub fn policy_gap(mdp: &TabularMdp, policy: &DeterministicPolicy) -> Result<f64> {
    let (v, q) = exact_policy_eval(mdp, policy)?;
    let mut gap = 0.0_f64;
    for t in 0..mdp.horizon() {
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                gap = gap.max(v.get(t, s) - q.get(t, s, a));
            }
        }
    }
    Ok(gap)
}
