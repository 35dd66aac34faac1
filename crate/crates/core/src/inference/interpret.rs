//! Latent-factor decomposition `p(τ|L_i) = p(τ|D) / p(L_i|D)` and per-step
//! interpretation series computed from episode traces.

use std::io::Write;

use crate::envs::EpisodeTrace;
use crate::error::{domain, validation, Result};

use super::operator::LIKELIHOOD_FLOOR;

/// `p(τ|D)` together with `p(L_i|D)` for each latent factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactorModel {
    pub trajectory_posterior: f64,
    pub factor_posteriors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorInterpretation {
    /// Uncapped ratio `p(τ|D) / p(L_i|D)`; multiplying back reconstructs `p(τ|D)`.
    pub ratio: f64,
    /// `min(ratio, 1)`.
    pub value: f64,
    /// Set when the ratio exceeded 1 and `value` was capped.
    pub capped: bool,
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("{what} = {p} is not in (0, 1]")));
    }
    Ok(())
}

pub fn decompose_interpretation(model: &LatentFactorModel) -> Result<Vec<FactorInterpretation>> {
    check_probability(model.trajectory_posterior, "p(τ|D)")?;
    model
        .factor_posteriors
        .iter()
        .enumerate()
        .map(|(i, &pl)| {
            check_probability(pl, &format!("p(L_{i}|D)"))?;
            let ratio = model.trajectory_posterior / pl;
            Ok(FactorInterpretation {
                ratio,
                value: ratio.min(1.0),
                capped: ratio > 1.0,
            })
        })
        .collect()
}

/// One row of an interpretation series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpretationRow {
    pub t: usize,
    pub factor: usize,
    pub trajectory_posterior: f64,
    pub factor_posterior: f64,
    pub interpretation: FactorInterpretation,
}

/// Per-step interpretation of a recorded episode.
///
/// `p(τ_{1:t}|D)` is the affine optimality likelihood of the return so far
/// relative to the best attainable return `t_max · r_max` of the trace.
/// Factor `i` is constraint signal `g^{i+1}`: `p(L_i|D)` is its running
/// frequency up to `t`. Both are floored at the likelihood floor.
pub fn interpret_trace(trace: &EpisodeTrace) -> Result<Vec<InterpretationRow>> {
    if trace.is_empty() {
        return Err(validation("cannot interpret an empty trace"));
    }
    let r_max = trace.rows.iter().map(|r| r.reward).fold(f64::NEG_INFINITY, f64::max);
    let best = r_max.max(0.0) * trace.len() as f64;
    let num_factors = trace.rows[0].utilities.len();
    let mut cumulative = 0.0;
    let mut counts = vec![0.0; num_factors];
    let mut out = Vec::with_capacity(trace.len() * num_factors);
    for (n, row) in trace.rows.iter().enumerate() {
        cumulative += row.reward;
        let p_traj = if best > 0.0 {
            (cumulative / best).clamp(LIKELIHOOD_FLOOR, 1.0)
        } else {
            1.0
        };
        for (c, g) in counts.iter_mut().zip(&row.utilities) {
            *c += g.abs().min(1.0);
        }
        let factors: Vec<f64> = counts
            .iter()
            .map(|c| (c / (n + 1) as f64).clamp(LIKELIHOOD_FLOOR, 1.0))
            .collect();
        let parts = decompose_interpretation(&LatentFactorModel {
            trajectory_posterior: p_traj,
            factor_posteriors: factors.clone(),
        })?;
        for (i, part) in parts.into_iter().enumerate() {
            out.push(InterpretationRow {
                t: row.t,
                factor: i,
                trajectory_posterior: p_traj,
                factor_posterior: factors[i],
                interpretation: part,
            });
        }
    }
    Ok(out)
}

/// CSV with header `t,factor,p_traj,p_factor,p_traj_given_factor,capped`.
pub fn write_interpretation<W: Write>(rows: &[InterpretationRow], mut w: W) -> Result<()> {
    writeln!(w, "t,factor,p_traj,p_factor,p_traj_given_factor,capped")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.8e},{:.8e},{:.8e},{}",
            r.t,
            r.factor,
            r.trajectory_posterior,
            r.factor_posterior,
            r.interpretation.value,
            u8::from(r.interpretation.capped)
        )?;
    }
    Ok(())
}
