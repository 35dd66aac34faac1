use crate::envs::TabularCmdp;
use crate::error::{validation, Result};
use crate::ot_metrics::OneDMeasure;

use super::quantile::{quantile_projection, QuantileDistribution, StateActionDistMap};

fn check_compatible(z: &StateActionDistMap, cmdp: &TabularCmdp) -> Result<()> {
    if z.num_states() != cmdp.num_states() || z.num_actions() != cmdp.num_actions() {
        return Err(validation("distribution map does not match the CMDP's state-action set"));
    }
    if z.num_signals() > cmdp.num_constraints() + 1 {
        return Err(validation("distribution map has more signals than the CMDP"));
    }
    Ok(())
}

fn check_policy(policy: &[usize], cmdp: &TabularCmdp) -> Result<()> {
    if policy.len() != cmdp.num_states() || policy.iter().any(|&a| a >= cmdp.num_actions()) {
        return Err(validation("policy must give one valid action per state"));
    }
    Ok(())
}

/// `Π_{W1}` of the mixture over `s'` of `h_i(s, a) + γ ζ^i(s', next(s'))`.
fn backup(
    z: &StateActionDistMap,
    cmdp: &TabularCmdp,
    i: usize,
    s: usize,
    a: usize,
    next: impl Fn(usize) -> usize,
) -> Result<QuantileDistribution> {
    let n = z.num_quantiles();
    let h = cmdp.signal(i, s, a);
    let gamma = cmdp.gamma();
    let mut positions = Vec::with_capacity(cmdp.num_states() * n);
    let mut weights = Vec::with_capacity(cmdp.num_states() * n);
    for (t, &p) in cmdp.transition(s, a).iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &q in z.get(i, t, next(t)).atoms() {
            positions.push(h + gamma * q);
            weights.push(p / n as f64);
        }
    }
    quantile_projection(&OneDMeasure::new(positions, weights)?, n)
}

/// `Π_{W1} 𝓣^π` applied to signal layer `i`; other layers are copied unchanged.
pub fn bellman_eval(z: &StateActionDistMap, policy: &[usize], cmdp: &TabularCmdp, i: usize) -> Result<StateActionDistMap> {
    check_compatible(z, cmdp)?;
    check_policy(policy, cmdp)?;
    if i >= z.num_signals() {
        return Err(validation(format!("signal index {i} out of range")));
    }
    let mut out = z.clone();
    for s in 0..cmdp.num_states() {
        for a in 0..cmdp.num_actions() {
            out.set(i, s, a, backup(z, cmdp, i, s, a, |t| policy[t])?)?;
        }
    }
    Ok(out)
}

/// Action with the largest reward-layer mean at `s`, lowest index on ties.
pub fn greedy_action(z: &StateActionDistMap, s: usize) -> usize {
    let mut best = 0;
    let mut best_mean = z.get(0, s, 0).mean();
    for a in 1..z.num_actions() {
        let m = z.get(0, s, a).mean();
        if m > best_mean {
            best = a;
            best_mean = m;
        }
    }
    best
}

/// `Π_{W1} 𝓣` on every layer, bootstrapping from the greedy reward action.
pub fn bellman_opt(z: &StateActionDistMap, cmdp: &TabularCmdp) -> Result<StateActionDistMap> {
    check_compatible(z, cmdp)?;
    let greedy: Vec<usize> = (0..cmdp.num_states()).map(|s| greedy_action(z, s)).collect();
    let mut out = z.clone();
    for i in 0..z.num_signals() {
        for s in 0..cmdp.num_states() {
            for a in 0..cmdp.num_actions() {
                out.set(i, s, a, backup(z, cmdp, i, s, a, |t| greedy[t])?)?;
            }
        }
    }
    Ok(out)
}

/// One sampled-transition distributional TD step on entry `(i, s, a)`.
///
/// The target is the projection of `h_i(s, a) + γ ζ^i(s', π(s'))`; every atom
/// moves a fraction `l_td` of the way to its target atom and the result is
/// re-sorted. The returned TD error is `W_∞` between target and the entry
/// before the move.
pub fn td_update(
    zeta: &StateActionDistMap,
    transition: (usize, usize, usize),
    i: usize,
    l_td: f64,
    cmdp: &TabularCmdp,
    policy: &[usize],
) -> Result<(StateActionDistMap, f64)> {
    check_compatible(zeta, cmdp)?;
    check_policy(policy, cmdp)?;
    let (s, a, next) = transition;
    if s >= cmdp.num_states() || a >= cmdp.num_actions() || next >= cmdp.num_states() {
        return Err(validation(format!("unknown transition {transition:?}")));
    }
    if cmdp.transition(s, a)[next] == 0.0 {
        return Err(validation(format!("transition {transition:?} has zero probability")));
    }
    if i >= zeta.num_signals() {
        return Err(validation(format!("signal index {i} out of range")));
    }
    if !(l_td > 0.0 && l_td <= 1.0) {
        return Err(validation(format!("TD step {l_td} outside (0, 1]")));
    }
    let h = cmdp.signal(i, s, a);
    let gamma = cmdp.gamma();
    let n = zeta.num_quantiles();
    let shifted: Vec<f64> = zeta.get(i, next, policy[next]).atoms().iter().map(|q| h + gamma * q).collect();
    let target = quantile_projection(&OneDMeasure::uniform(shifted)?, n)?;
    let current = zeta.get(i, s, a);
    let delta = current
        .atoms()
        .iter()
        .zip(target.atoms())
        .map(|(q, t)| (q - t).abs())
        .fold(0.0, f64::max);
    let moved = if l_td == 1.0 {
        target.atoms().to_vec()
    } else {
        current
            .atoms()
            .iter()
            .zip(target.atoms())
            .map(|(q, t)| q + l_td * (t - q))
            .collect()
    };
    let mut out = zeta.clone();
    out.set(i, s, a, QuantileDistribution::from_unsorted(moved)?)?;
    Ok((out, delta))
}
