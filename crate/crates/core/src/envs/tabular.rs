//! Finite CMDPs with exact policy evaluation, used as test scaffolding.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::{rng_from_seed, Rng as SeededRng};

use super::{CmdpModel, EnvStep};

/// Stochastic rows must sum to one within this tolerance.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// `P[s][a][s']`, `r[s][a]`, `g[i][s][a]`, bounds, discount and start distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCmdp {
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
    utilities: Vec<Vec<Vec<f64>>>,
    bounds: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
}

/// A (possibly stochastic) tabular policy, `probs[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    probs: Vec<Vec<f64>>,
}

impl PolicyTable {
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let probs = actions
            .iter()
            .map(|&a| {
                if a >= num_actions {
                    return Err(validation(format!("action {a} out of range {num_actions}")));
                }
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Ok(Self { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: vec![vec![1.0 / num_actions as f64; num_actions]; num_states],
        }
    }

    pub fn stochastic(probs: Vec<Vec<f64>>) -> Result<Self> {
        for row in &probs {
            check_row(row, "policy")?;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    /// Most likely action, lowest index on ties.
    pub fn action(&self, s: usize) -> usize {
        let row = &self.probs[s];
        let mut best = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.is_empty() || row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(validation(format!("{what} row has negative or non-finite entries")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(validation(format!("{what} row sums to {sum}")));
    }
    Ok(())
}

impl TabularCmdp {
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        utilities: Vec<Vec<Vec<f64>>>,
        bounds: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let ns = transitions.len();
        if ns == 0 {
            return Err(validation("CMDP needs at least one state"));
        }
        let na = transitions[0].len();
        if na == 0 {
            return Err(validation("CMDP needs at least one action"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("discount {gamma} outside [0, 1)")));
        }
        for rows in &transitions {
            if rows.len() != na {
                return Err(validation("ragged transition tensor"));
            }
            for row in rows {
                if row.len() != ns {
                    return Err(validation("transition row length differs from state count"));
                }
                check_row(row, "transition")?;
            }
        }
        let table_ok = |t: &Vec<Vec<f64>>| t.len() == ns && t.iter().all(|r| r.len() == na && r.iter().all(|v| v.is_finite()));
        if !table_ok(&rewards) || !utilities.iter().all(table_ok) {
            return Err(validation("reward or utility table has the wrong shape"));
        }
        if bounds.len() != utilities.len() {
            return Err(validation("one bound per utility required"));
        }
        if initial.len() != ns {
            return Err(validation("initial distribution length differs from state count"));
        }
        check_row(&initial, "initial distribution")?;
        Ok(Self {
            transitions,
            rewards,
            utilities,
            bounds,
            gamma,
            initial,
        })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions[0].len()
    }

    pub fn num_constraints(&self) -> usize {
        self.utilities.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[s][a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s][a]
    }

    pub fn utility(&self, i: usize, s: usize, a: usize) -> f64 {
        self.utilities[i][s][a]
    }

    /// Signal `h_i`: index 0 is the reward, `i ≥ 1` the `i`-th utility.
    pub fn signal(&self, i: usize, s: usize, a: usize) -> f64 {
        if i == 0 {
            self.rewards[s][a]
        } else {
            self.utilities[i - 1][s][a]
        }
    }

    /// Copy with the reward table replaced.
    pub fn with_rewards(&self, rewards: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.transitions.clone(),
            rewards,
            self.utilities.clone(),
            self.bounds.clone(),
            self.gamma,
            self.initial.clone(),
        )
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.transitions.clone(),
            self.rewards.clone(),
            self.utilities.clone(),
            self.bounds.clone(),
            gamma,
            self.initial.clone(),
        )
    }

    fn check_signal(&self, i: usize) -> Result<()> {
        if i > self.num_constraints() {
            return Err(validation(format!("signal index {i} exceeds {}", self.num_constraints())));
        }
        Ok(())
    }

    /// Exact state values of signal `i`: solves `(I − γ P_π) V = h_π`.
    pub fn evaluate(&self, policy: &PolicyTable, i: usize) -> Result<Vec<f64>> {
        self.check_signal(i)?;
        let ns = self.num_states();
        if policy.num_states() != ns {
            return Err(validation("policy state count differs from CMDP"));
        }
        let mut m = DMatrix::<f64>::identity(ns, ns);
        let mut h = DVector::<f64>::zeros(ns);
        for s in 0..ns {
            for (a, &pa) in policy.probs(s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                h[s] += pa * self.signal(i, s, a);
                for (t, &p) in self.transitions[s][a].iter().enumerate() {
                    m[(s, t)] -= self.gamma * pa * p;
                }
            }
        }
        let v = m
            .lu()
            .solve(&h)
            .ok_or_else(|| Error::Domain("policy evaluation system is singular".into()))?;
        Ok(v.iter().copied().collect())
    }

    /// Exact `Q^π_i(s, a) = h_i(s, a) + γ Σ P(s'|s,a) V^π_i(s')`.
    pub fn q_values(&self, policy: &PolicyTable, i: usize) -> Result<Vec<Vec<f64>>> {
        let v = self.evaluate(policy, i)?;
        Ok(self.q_from_values(&v, i))
    }

    pub fn q_from_values(&self, v: &[f64], i: usize) -> Vec<Vec<f64>> {
        (0..self.num_states())
            .map(|s| {
                (0..self.num_actions())
                    .map(|a| {
                        let next: f64 = self.transitions[s][a].iter().zip(v).map(|(p, v)| p * v).sum();
                        self.signal(i, s, a) + self.gamma * next
                    })
                    .collect()
            })
            .collect()
    }

    /// Discounted objective `J_i(π) = Σ_s ρ(s) V^π_i(s)`.
    pub fn objective(&self, policy: &PolicyTable, i: usize) -> Result<f64> {
        let v = self.evaluate(policy, i)?;
        Ok(self.initial.iter().zip(&v).map(|(p, v)| p * v).sum())
    }

    /// Optimal unconstrained values of signal `i` by value iteration to `tol`.
    pub fn optimal_values(&self, i: usize, tol: f64) -> Result<Vec<f64>> {
        self.check_signal(i)?;
        let mut v = vec![0.0; self.num_states()];
        loop {
            let q = self.q_from_values(&v, i);
            let next: Vec<f64> = q
                .iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            // sup-norm error after this sweep is at most γ/(1−γ) times the change
            if diff * self.gamma / (1.0 - self.gamma).max(1e-300) <= tol {
                return Ok(v);
            }
        }
    }

    /// Draws a successor of `(s, a)` from `u ∈ [0, 1)`.
    pub fn sample_next(&self, s: usize, a: usize, u: f64) -> usize {
        sample_index(&self.transitions[s][a], u)
    }
}

pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // round-off: fall back to the last index with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Random CMDP: normalized-uniform rows, rewards in `[0, 1]`, utilities in
/// `{0, 1}`, uniform start, `γ = 0.9`. Each bound is the uniform random
/// policy's constraint value plus a `U[0, 1)` margin, so that policy is feasible.
pub fn random_tabular_cmdp(num_states: usize, num_actions: usize, num_constraints: usize, seed: u64) -> Result<TabularCmdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(validation("random CMDP needs at least one state and one action"));
    }
    let mut rng = rng_from_seed(seed);
    let row = |rng: &mut SeededRng| -> Vec<f64> {
        let raw: Vec<f64> = (0..num_states).map(|_| rng.random_range(1e-3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
        // pin the sum to exactly one by absorbing round-off into the largest entry
        let err = 1.0 - row.iter().sum::<f64>();
        let big = (0..num_states).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        row[big] += err;
        row
    };
    let transitions = (0..num_states)
        .map(|_| (0..num_actions).map(|_| row(&mut rng)).collect())
        .collect();
    let rewards = (0..num_states)
        .map(|_| (0..num_actions).map(|_| rng.random_range(0.0..=1.0)).collect())
        .collect();
    let utilities = (0..num_constraints)
        .map(|_| {
            (0..num_states)
                .map(|_| (0..num_actions).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    let initial = vec![1.0 / num_states as f64; num_states];
    let mut cmdp = TabularCmdp::new(transitions, rewards, utilities, vec![0.0; num_constraints], 0.9, initial)?;
    let uniform = PolicyTable::uniform(num_states, num_actions);
    let bounds = (1..=num_constraints)
        .map(|i| Ok(cmdp.objective(&uniform, i)? + rng.random_range(0.0..1.0)))
        .collect::<Result<Vec<_>>>()?;
    cmdp.bounds = bounds;
    Ok(cmdp)
}

/// Step-by-step simulator over a [`TabularCmdp`].
///
/// Observations are one-hot state vectors. The scalar action in `[-1, 1]`
/// is mapped to index `floor((a + 1) / 2 · nA)`, clamped to the valid range.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    pub cmdp: TabularCmdp,
    pub horizon: usize,
    state: usize,
    steps: usize,
    rng: SeededRng,
}

impl TabularEnv {
    pub fn new(cmdp: TabularCmdp, horizon: usize) -> Self {
        Self {
            cmdp,
            horizon,
            state: 0,
            steps: 0,
            rng: rng_from_seed(0),
        }
    }

    pub fn state_index(&self) -> usize {
        self.state
    }

    pub fn action_index(&self, action: f64) -> usize {
        let na = self.cmdp.num_actions();
        let idx = ((action + 1.0) / 2.0 * na as f64).floor();
        if idx.is_nan() {
            return 0;
        }
        (idx.max(0.0) as usize).min(na - 1)
    }

    /// Centre of the action interval that maps to index `a`.
    pub fn action_value(&self, a: usize) -> f64 {
        let na = self.cmdp.num_actions() as f64;
        (a as f64 + 0.5) / na * 2.0 - 1.0
    }

    fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.cmdp.num_states()];
        v[self.state] = 1.0;
        v
    }
}

impl CmdpModel for TabularEnv {
    fn name(&self) -> &str {
        "tabular"
    }

    fn observation_dim(&self) -> usize {
        self.cmdp.num_states()
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn num_constraints(&self) -> usize {
        self.cmdp.num_constraints()
    }

    fn discount(&self) -> f64 {
        self.cmdp.gamma()
    }

    fn bounds(&self) -> &[f64] {
        self.cmdp.bounds()
    }

    fn reward_range(&self) -> (f64, f64) {
        let all = self.cmdp.rewards.iter().flatten();
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn max_steps(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = rng_from_seed(seed);
        let u = self.rng.random_range(0.0..1.0);
        self.state = sample_index(self.cmdp.initial(), u);
        self.steps = 0;
        self.one_hot()
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let a = *action
            .first()
            .ok_or_else(|| Error::Environment("empty action".into()))?;
        if !a.is_finite() {
            return Err(Error::Environment(format!("non-finite action {a}")));
        }
        let a = self.action_index(a);
        let s = self.state;
        let reward = self.cmdp.reward(s, a);
        let utilities = (0..self.cmdp.num_constraints()).map(|i| self.cmdp.utility(i, s, a)).collect();
        let u = self.rng.random_range(0.0..1.0);
        self.state = self.cmdp.sample_next(s, a, u);
        self.steps += 1;
        Ok(EnvStep {
            observation: self.one_hot(),
            reward,
            utilities,
            terminated: false,
            truncated: self.steps >= self.horizon,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        vec![self.state as f64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_is_absorbing() {
        let m = random_tabular_cmdp(1, 1, 1, 3).unwrap();
        assert_eq!(m.transition(0, 0), &[1.0]);
    }

    #[test]
    fn deterministic_generation() {
        assert_eq!(random_tabular_cmdp(4, 3, 2, 11).unwrap(), random_tabular_cmdp(4, 3, 2, 11).unwrap());
    }

    #[test]
    fn uniform_policy_is_feasible() {
        for seed in 0..20 {
            let m = random_tabular_cmdp(3, 2, 2, seed).unwrap();
            let uni = PolicyTable::uniform(3, 2);
            for i in 1..=2 {
                assert!(m.objective(&uni, i).unwrap() <= m.bounds()[i - 1]);
            }
        }
    }

    #[test]
    fn geometric_single_state() {
        let m = TabularCmdp::new(vec![vec![vec![1.0]]], vec![vec![1.0]], vec![vec![vec![1.0]]], vec![0.0], 0.5, vec![1.0])
            .unwrap();
        let pi = PolicyTable::deterministic(&[0], 1).unwrap();
        assert!((m.objective(&pi, 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rows() {
        let r = TabularCmdp::new(vec![vec![vec![0.5, 0.4]]; 2], vec![vec![0.0]; 2], vec![], vec![], 0.9, vec![0.5, 0.5]);
        assert!(r.is_err());
    }

    #[test]
    fn action_mapping_round_trips() {
        let env = TabularEnv::new(random_tabular_cmdp(2, 3, 0, 0).unwrap(), 10);
        for a in 0..3 {
            assert_eq!(env.action_index(env.action_value(a)), a);
        }
        assert_eq!(env.action_index(-5.0), 0);
        assert_eq!(env.action_index(1.0), 2);
    }
}
