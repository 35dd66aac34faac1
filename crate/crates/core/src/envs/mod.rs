//! Constrained control tasks and random tabular CMDPs.
//!
//! Every environment implements [`CmdpModel`]: a reset from an explicit seed,
//! a step returning the reward and one utility per constraint, plus the
//! discount and constraint bounds the updater needs. Reward and utilities of
//! a step are functions of the state the action was taken in.

mod acrobot;
mod cartpole;
mod tabular;
mod trace;

pub use acrobot::{
    acrobot_energy, acrobot_step, end_effector_height, torque_from_action, AcrobotEnv, AcrobotOutcome,
    AcrobotParams, AcrobotState,
};
pub use cartpole::{
    angle_penalty, cartpole_dynamics, cartpole_step, force_from_action, position_penalty, CartpoleEnv, CartpoleOutcome,
    CartpoleParams, CartpoleState, PENALTY_ZONES,
};
pub use tabular::{random_tabular_cmdp, PolicyTable, TabularCmdp, TabularEnv};
pub use trace::{EpisodeTrace, TraceRow};

use crate::error::Result;

/// Cumulative return curves start from this value.
pub const INITIAL_CUMULATIVE_RETURN: f64 = -250.0;

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// `g^1 .. g^p`
    pub utilities: Vec<f64>,
    /// Failure termination (no bootstrapping past this step).
    pub terminated: bool,
    /// Time-limit cut-off.
    pub truncated: bool,
}

impl EnvStep {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// A constrained MDP that can be rolled out step by step.
pub trait CmdpModel {
    fn name(&self) -> &str;
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn discount(&self) -> f64;
    /// Constraint bounds `b_1 .. b_p`.
    fn bounds(&self) -> &[f64];
    /// Range of a single step's reward.
    fn reward_range(&self) -> (f64, f64);
    fn max_steps(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;
    /// Raw physical (or tabular) state, used for trace export.
    fn state_vector(&self) -> Vec<f64>;
}

/// Running episode return, starting at [`INITIAL_CUMULATIVE_RETURN`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeReturn {
    value: f64,
    steps: usize,
}

impl Default for CumulativeReturn {
    fn default() -> Self {
        Self {
            value: INITIAL_CUMULATIVE_RETURN,
            steps: 0,
        }
    }
}

impl CumulativeReturn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, reward: f64) {
        self.value += reward;
        self.steps += 1;
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Running return after feeding every reward of an episode.
pub fn cumulative_return_tracker(rewards: &[f64]) -> CumulativeReturn {
    let mut t = CumulativeReturn::new();
    rewards.iter().for_each(|&r| t.add(r));
    t
}
