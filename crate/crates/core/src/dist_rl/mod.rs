//! Quantile distributional RL: the `Π_{W1}` projection, tabular Bellman
//! operators and TD updates, and network gradients for the quantile critic
//! and deterministic actor.

mod nets;
mod operators;
mod quantile;

pub use nets::{
    actor_gradient, actor_objective, batch_states, critic_gradient, critic_gradient_with_targets, critic_targets, critic_targets_all,
    quantile_check_loss, quantile_loss, ActionSquash, CriticGradient, NetLayout, PolicyNets, ReplayBuffer,
    Transition,
};
pub use operators::{bellman_eval, bellman_opt, greedy_action, td_update};
pub use quantile::{dbar, quantile_levels, quantile_projection, QuantileDistribution, StateActionDistMap};

/// Quantile atoms per distribution unless configured otherwise.
pub const DEFAULT_NUM_QUANTILES: usize = 32;
