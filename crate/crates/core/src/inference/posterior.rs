use crate::envs::{PolicyTable, TabularCmdp};
use crate::error::{validation, Result};

use super::likelihood::likelihood_from_reward;
use super::operator::RewardOperatorFamily;

/// Probabilities entering the trajectory factorization.
pub trait TrajectoryModel {
    fn initial_prob(&self, s: usize) -> f64;
    /// `p(a | s, θ)`.
    fn action_prob(&self, s: usize, a: usize) -> f64;
    fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64;
}

/// A tabular CMDP driven by a tabular policy.
#[derive(Debug, Clone, Copy)]
pub struct TabularPolicyModel<'a> {
    pub cmdp: &'a TabularCmdp,
    pub policy: &'a PolicyTable,
}

impl TrajectoryModel for TabularPolicyModel<'_> {
    fn initial_prob(&self, s: usize) -> f64 {
        self.cmdp.initial().get(s).copied().unwrap_or(0.0)
    }

    fn action_prob(&self, s: usize, a: usize) -> f64 {
        self.policy.probs(s).get(a).copied().unwrap_or(0.0)
    }

    fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.cmdp.transition(s, a).get(next).copied().unwrap_or(0.0)
    }
}

/// State/action index sequence: `states.len() == actions.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

/// Unnormalized log posterior of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPosterior {
    pub value: f64,
    /// Step at which a zero-probability factor was met (value is `−∞`).
    pub impossible_at: Option<usize>,
}

/// `log p(𝓞|τ) + log p(s₁) + Σ_t [log p(a_t|s_t,θ) + log p(s_{t+1}|s_t,a_t)] + log p_D(θ)`.
pub fn trajectory_posterior(
    traj: &TabularTrajectory,
    f: &RewardOperatorFamily,
    model: &impl TrajectoryModel,
    log_prior: f64,
) -> Result<LogPosterior> {
    if traj.states.len() != traj.actions.len() + 1 || traj.rewards.len() != traj.actions.len() {
        return Err(validation("trajectory needs one more state than actions and one reward per action"));
    }
    let (likelihood, _) = likelihood_from_reward(traj.rewards.iter().sum(), f)?;
    let impossible = |t| LogPosterior {
        value: f64::NEG_INFINITY,
        impossible_at: Some(t),
    };
    let p0 = model.initial_prob(traj.states[0]);
    if p0 <= 0.0 {
        return Ok(impossible(0));
    }
    let mut value = likelihood.ln() + p0.ln() + log_prior;
    for (t, &a) in traj.actions.iter().enumerate() {
        let (s, next) = (traj.states[t], traj.states[t + 1]);
        let pa = model.action_prob(s, a);
        let ps = model.transition_prob(s, a, next);
        if pa <= 0.0 || ps <= 0.0 {
            return Ok(impossible(t));
        }
        value += pa.ln() + ps.ln();
    }
    Ok(LogPosterior {
        value,
        impossible_at: None,
    })
}
