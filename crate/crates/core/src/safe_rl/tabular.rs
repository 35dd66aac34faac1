//! Exact primal policy iteration on a tabular CMDP.
//!
//! The learner never sees the true reward. Each reward is first turned into
//! an optimality likelihood `p = (r − r_lo)/(r_hi − r_lo)` (the affine
//! inverse over the table's range, floored), then mapped back through the
//! family under test, `r' = 𝓕_r(p)`. Greedy improvement runs on `r'`, while
//! the recorded `Q^{π_i}` uses the true reward. A family satisfying the
//! Conditions preserves the ordering of rewards, so `Q^{π_i}` can only rise;
//! a non-monotone family can break that.

use crate::envs::{PolicyTable, TabularCmdp};
use crate::error::{validation, Result};
use crate::inference::{RewardOperatorFamily, LIKELIHOOD_FLOOR};

use super::{choose_branch, BranchDecision};

#[derive(Debug, Clone)]
pub struct PolicyIterationTrace {
    /// Deterministic policy of each iterate, starting with the initial one.
    pub policies: Vec<Vec<usize>>,
    /// True-reward `Q^{π_i}(s, a)` of each iterate.
    pub q_values: Vec<Vec<Vec<f64>>>,
    /// Branch used to produce iterate `i + 1` from iterate `i`.
    pub branches: Vec<BranchDecision>,
    /// Unconstrained optimal `Q*` of the true reward.
    pub optimal_q: Vec<Vec<f64>>,
}

impl PolicyIterationTrace {
    /// Largest drop `Q^{π_i}(s,a) − Q^{π_{i+1}}(s,a)`, or 0 if the sequence never decreases.
    pub fn monotonicity_violation(&self) -> f64 {
        self.q_values
            .windows(2)
            .flat_map(|w| {
                w[0].iter()
                    .flatten()
                    .zip(w[1].iter().flatten())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// `max |Q^{π_last} − Q*|`.
    pub fn final_gap(&self) -> f64 {
        let last = self.q_values.last().expect("trace holds the initial iterate");
        last.iter()
            .flatten()
            .zip(self.optimal_q.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Reward table the learner sees after the likelihood round trip.
pub fn shaped_rewards(cmdp: &TabularCmdp, family: &RewardOperatorFamily) -> Vec<Vec<f64>> {
    let (ns, na) = (cmdp.num_states(), cmdp.num_actions());
    let all = (0..ns).flat_map(|s| (0..na).map(move |a| (s, a)));
    let lo = all.clone().map(|(s, a)| cmdp.reward(s, a)).fold(f64::INFINITY, f64::min);
    let hi = all.map(|(s, a)| cmdp.reward(s, a)).fold(f64::NEG_INFINITY, f64::max);
    (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| {
                    let p = if hi > lo {
                        ((cmdp.reward(s, a) - lo) / (hi - lo)).clamp(LIKELIHOOD_FLOOR, 1.0)
                    } else {
                        1.0
                    };
                    family.forward_r(p)
                })
                .collect()
        })
        .collect()
}

fn improve(current: &[usize], q: &[Vec<f64>], maximize: bool) -> Vec<usize> {
    let sign = if maximize { 1.0 } else { -1.0 };
    current
        .iter()
        .zip(q)
        .map(|(&a0, row)| {
            let mut best = a0;
            for (a, &v) in row.iter().enumerate() {
                // switch only on a strict improvement so ties cannot cycle
                if sign * (v - row[best]) > 1e-12 {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Runs greedy primal policy iteration until the policy is stable or
/// `max_iterations` improvements were made.
pub fn primal_policy_iteration(
    cmdp: &TabularCmdp,
    family: &RewardOperatorFamily,
    tau_c: f64,
    initial: &[usize],
    max_iterations: usize,
) -> Result<PolicyIterationTrace> {
    if initial.len() != cmdp.num_states() {
        return Err(validation("initial policy needs one action per state"));
    }
    let na = cmdp.num_actions();
    let learner = cmdp.with_rewards(shaped_rewards(cmdp, family))?;
    let optimal_v = cmdp.optimal_values(0, 1e-13)?;
    let mut trace = PolicyIterationTrace {
        policies: vec![initial.to_vec()],
        q_values: vec![cmdp.q_values(&PolicyTable::deterministic(initial, na)?, 0)?],
        branches: Vec::new(),
        optimal_q: cmdp.q_from_values(&optimal_v, 0),
    };
    let mut policy = initial.to_vec();
    for _ in 0..max_iterations {
        let table = PolicyTable::deterministic(&policy, na)?;
        let estimates = (1..=cmdp.num_constraints())
            .map(|i| cmdp.objective(&table, i))
            .collect::<Result<Vec<_>>>()?;
        let branch = choose_branch(&estimates, cmdp.bounds(), tau_c)?;
        let next = match branch {
            BranchDecision::Reward => improve(&policy, &learner.q_values(&table, 0)?, true),
            BranchDecision::Constraint(i) => improve(&policy, &cmdp.q_values(&table, i + 1)?, false),
        };
        if next == policy {
            break;
        }
        policy = next;
        trace.branches.push(branch);
        trace.policies.push(policy.clone());
        trace
            .q_values
            .push(cmdp.q_values(&PolicyTable::deterministic(&policy, na)?, 0)?);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::random_tabular_cmdp;

    #[test]
    fn affine_family_reaches_optimum_monotonically() {
        let family = RewardOperatorFamily::affine(0.0, 1.0).unwrap();
        for seed in 0..20 {
            let m = random_tabular_cmdp(2, 2, 0, seed).unwrap();
            let trace = primal_policy_iteration(&m, &family, 0.5, &[0, 0], 50).unwrap();
            assert!(trace.monotonicity_violation() <= 1e-6);
            assert!(trace.final_gap() <= 1e-3, "seed {seed}: gap {}", trace.final_gap());
        }
    }
}
