//! Primal constrained policy updates.
//!
//! Each update first compares the estimated constraint values with their
//! bounds. If every `Ĵ^i_g ≤ b_i + τ_c` the actor climbs the reward critic;
//! otherwise it descends the critic of the lowest-index violated
//! constraint. The quantile critic is trained on every signal in both cases.

mod tabular;

pub use tabular::{primal_policy_iteration, PolicyIterationTrace};

pub use crate::dist_rl::{NetLayout, PolicyNets, Transition};
pub use crate::envs::CmdpModel;

use std::fmt;

use crate::dist_rl::{actor_gradient, batch_states, critic_gradient_with_targets, critic_targets_all};
use crate::error::{domain, validation, Error, Result};
use crate::nn::{sgd_step, Direction};
use crate::ot_metrics::{DefiningFunction, SliceParameterSet};

/// Default fixed constraint tolerance.
pub const DEFAULT_TOLERANCE: f64 = 0.5;

/// Slices emitted per decision step.
pub const DEFAULT_SLICES_PER_STATE: usize = 8;

/// Estimated `𝓙^i_g` for each constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEstimate {
    pub values: Vec<f64>,
    pub episodes: usize,
}

/// Monte-Carlo estimates of the discounted objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEstimate {
    /// Discounted reward `Ĵ_r`.
    pub reward: f64,
    pub constraints: ConstraintEstimate,
    /// Undiscounted episode return, averaged.
    pub mean_return: f64,
    pub mean_length: f64,
}

/// Rolls out `policy` for `episodes` episodes. Episode `e` resets the
/// environment with seed `rng_seed + e`.
pub fn estimate_with_policy(
    mut policy: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    env: &mut dyn CmdpModel,
    episodes: usize,
    rng_seed: u64,
) -> Result<ObjectiveEstimate> {
    if episodes == 0 {
        return Err(validation("estimation needs at least one episode"));
    }
    let p = env.num_constraints();
    let gamma = env.discount();
    let (mut jr, mut jg) = (0.0, vec![0.0; p]);
    let (mut ret, mut len) = (0.0, 0.0);
    for e in 0..episodes {
        let mut obs = env.reset(rng_seed.wrapping_add(e as u64));
        let mut discount = 1.0;
        for _ in 0..env.max_steps() {
            let action = policy(&obs)?;
            let step = env.step(&action)?;
            jr += discount * step.reward;
            for (acc, g) in jg.iter_mut().zip(&step.utilities) {
                *acc += discount * g;
            }
            ret += step.reward;
            len += 1.0;
            discount *= gamma;
            let done = step.done();
            obs = step.observation;
            if done {
                break;
            }
        }
    }
    let n = episodes as f64;
    let values: Vec<f64> = jg.iter().map(|v| v / n).collect();
    if !jr.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite objective estimate".into()));
    }
    Ok(ObjectiveEstimate {
        reward: jr / n,
        constraints: ConstraintEstimate { values, episodes },
        mean_return: ret / n,
        mean_length: len / n,
    })
}

/// Estimates under the deterministic actor (no exploration noise).
pub fn estimate_objectives(
    nets: &PolicyNets,
    env: &mut dyn CmdpModel,
    episodes: usize,
    rng_seed: u64,
) -> Result<ObjectiveEstimate> {
    estimate_with_policy(|s| nets.act(s), env, episodes, rng_seed)
}

/// Which objective an update follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchDecision {
    Reward,
    /// Zero-based index of the violated constraint being descended.
    Constraint(usize),
}

impl fmt::Display for BranchDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchDecision::Reward => write!(f, "reward"),
            BranchDecision::Constraint(i) => write!(f, "g{}", i + 1),
        }
    }
}

impl std::str::FromStr for BranchDecision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "reward" {
            return Ok(BranchDecision::Reward);
        }
        s.strip_prefix('g')
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| BranchDecision::Constraint(n - 1))
            .ok_or_else(|| Error::Parse(format!("unknown branch '{s}'")))
    }
}

/// Reward branch iff `Ĵ^i_g ≤ b_i + τ_c` for every `i` (non-strict).
pub fn choose_branch(estimates: &[f64], bounds: &[f64], tau_c: f64) -> Result<BranchDecision> {
    if !(tau_c >= 0.0) {
        return Err(validation(format!("tolerance must be non-negative, got {tau_c}")));
    }
    if estimates.len() != bounds.len() {
        return Err(validation("one estimate per bound required"));
    }
    Ok(estimates
        .iter()
        .zip(bounds)
        .position(|(j, b)| *j > b + tau_c)
        .map_or(BranchDecision::Reward, BranchDecision::Constraint))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSettings {
    pub tau_c: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub nets: PolicyNets,
    pub branch: BranchDecision,
    pub critic_loss: f64,
    /// Largest sorted-atom gap between critic and target over the batch.
    pub td_error: f64,
}

/// One primal constrained update: critic descent on the quantile loss of all
/// signals, then actor ascent on the reward or descent on the violated
/// constraint. `target` supplies bootstrap values (the nets themselves when
/// `None`).
pub fn policy_update_step(
    nets: &PolicyNets,
    target: Option<&PolicyNets>,
    batch: &[Transition],
    estimates: &ConstraintEstimate,
    bounds: &[f64],
    settings: &UpdateSettings,
) -> Result<UpdateOutcome> {
    let branch = choose_branch(&estimates.values, bounds, settings.tau_c)?;
    let target = target.unwrap_or(nets);
    let signals = critic_targets_all(target, batch, settings.gamma)?;
    let critic = critic_gradient_with_targets(nets, batch, &signals)?;
    let mut next = nets.clone();
    next.critic = sgd_step(&nets.critic, &critic.grads, settings.critic_lr, Direction::Minimize)?;
    let states = batch_states(batch);
    let (signal, direction) = match branch {
        BranchDecision::Reward => (0, Direction::Maximize),
        BranchDecision::Constraint(i) => (i + 1, Direction::Minimize),
    };
    let actor_grads = actor_gradient(&next, &states, signal)?;
    next.actor = sgd_step(&next.actor, &actor_grads, settings.actor_lr, direction)?;
    Ok(UpdateOutcome {
        nets: next,
        branch,
        critic_loss: critic.loss,
        td_error: critic.td_error,
    })
}

/// Constants of the tolerance schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConstants {
    pub c1: f64,
    pub c2: f64,
}

fn schedule_terms(t: f64, m: f64, h: f64, gamma: f64) -> (f64, f64) {
    (1.0 / ((1.0 - gamma) * t.sqrt()), 1.0 / ((1.0 - gamma) * t * m.powf(h / 4.0)))
}

impl Default for ToleranceConstants {
    /// Calibrated so that `T = 1000, m = 128, H = 2, γ = 0.998` gives 0.5.
    fn default() -> Self {
        let (a, b) = schedule_terms(1000.0, 128.0, 2.0, 0.998);
        let c = DEFAULT_TOLERANCE / (a + b);
        Self { c1: c, c2: c }
    }
}

/// `τ_c = c₁ / ((1−γ)√T) + c₂ / ((1−γ) T m^{H/4})`.
pub fn tolerance_schedule(
    total_iterations: usize,
    width: usize,
    layers: usize,
    gamma: f64,
    constants: ToleranceConstants,
) -> Result<f64> {
    if total_iterations == 0 {
        return Err(validation("tolerance schedule needs T >= 1"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain(format!("discount {gamma} outside [0, 1)")));
    }
    let (a, b) = schedule_terms(total_iterations as f64, width as f64, layers as f64, gamma);
    Ok(constants.c1 * a + constants.c2 * b)
}

/// Normalizes the actor's slice head at `state` into defining functions
/// over the action space. An all-zero coefficient block falls back to the
/// canonical polynomial (unit weight on the first monomial).
pub fn emit_slice_params(nets: &PolicyNets, state: &[f64]) -> Result<SliceParameterSet> {
    let l = &nets.layout;
    if l.slice_count == 0 {
        return Err(validation("layout emits no slices"));
    }
    let head = nets.actor_head(state)?;
    slices_from_head(&head[l.action_dim..], l)
}

pub(crate) fn slices_from_head(head: &[f64], l: &NetLayout) -> Result<SliceParameterSet> {
    if head.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite slice head output".into()));
    }
    let block = l.slice_block();
    let mut slices = Vec::with_capacity(l.slice_count);
    let mut offsets = Vec::with_capacity(l.slice_count);
    for chunk in head.chunks(block).take(l.slice_count) {
        let (coeffs, offset) = chunk.split_at(block - 1);
        let f = match DefiningFunction::polynomial_normalized(l.action_dim, l.slice_degree, coeffs)? {
            Some(f) => f,
            None => DefiningFunction::canonical_polynomial(l.action_dim, l.slice_degree)?,
        };
        slices.push(f);
        offsets.push(offset[0]);
    }
    SliceParameterSet::with_offsets(slices, offsets)
}
