//! Descent on the sliced transport objective with respect to the atom
//! positions of the variational measure.
//!
//! For finite `k` the objective is `M(q) = (1/L) Σ_l W_k^k(β_l # q, β_l # p)`,
//! whose `k`-th root is the A-GSWD, so both share descent directions. Along
//! each slice the optimal 1-D plan is the monotone coupling, giving the
//! closed form `∂M/∂x_i = (1/L) Σ_l Σ_j π_ij k |y_i − z_j|^{k−1} sign(y_i − z_j) ∇β_l(x_i)`.
//! For `k = ∞` the gradient is the subgradient through the worst slice and
//! its longest coupled pair.

use crate::error::{validation, Result};
use crate::ot_metrics::{agswd, monotone_coupling, DiscreteMeasure, Order, SliceParameterSet};

/// Step-halving attempts before giving up on a decrease.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub struct VariationalStep {
    pub measure: DiscreteMeasure,
    /// Gradient of `M` at the input atoms (one row per atom).
    pub gradient: Vec<Vec<f64>>,
    /// A-GSWD before and after the step.
    pub distance_before: f64,
    pub distance_after: f64,
    /// Step size actually taken (0 when nothing decreased the objective).
    pub step_used: f64,
}

fn slice_positions(m: &DiscreteMeasure, slices: &SliceParameterSet, l: usize) -> Vec<f64> {
    let f = &slices.slices()[l];
    let off = slices.offset(l);
    m.atoms().iter().map(|x| f.eval(x) - off).collect()
}

/// `∇M` with respect to the atoms of `q`.
pub fn objective_gradient(
    q: &DiscreteMeasure,
    p: &DiscreteMeasure,
    k: Order,
    slices: &SliceParameterSet,
) -> Result<Vec<Vec<f64>>> {
    k.validate()?;
    if q.dim() != p.dim() || slices.dim() != q.dim() {
        return Err(validation("measures and slices must share a dimension"));
    }
    let d = q.dim();
    let mut grad = vec![vec![0.0; d]; q.len()];
    let num = slices.len() as f64;
    // (signed gap, slice, atom) of the longest coupled pair so far
    let mut worst: Option<(f64, usize, usize)> = None;
    for l in 0..slices.len() {
        let yq = slice_positions(q, slices, l);
        let yp = slice_positions(p, slices, l);
        let f = &slices.slices()[l];
        for (i, j, mass) in monotone_coupling(&yq, q.weights(), &yp, p.weights()) {
            let diff = yq[i] - yp[j];
            match k {
                Order::Finite(k) => {
                    let scale = if diff == 0.0 {
                        0.0
                    } else if k == 1.0 {
                        diff.signum()
                    } else {
                        k * diff.abs().powf(k - 1.0) * diff.signum()
                    };
                    if scale == 0.0 || mass <= 0.0 {
                        continue;
                    }
                    for (g, df) in grad[i].iter_mut().zip(f.gradient(&q.atoms()[i])) {
                        *g += mass * scale * df / num;
                    }
                }
                Order::Infinity => {
                    if mass > 1e-12 && worst.is_none_or(|(w, _, _)| diff.abs() > w.abs()) {
                        worst = Some((diff, l, i));
                    }
                }
            }
        }
    }
    if let (Order::Infinity, Some((diff, l, i))) = (k, worst) {
        if diff != 0.0 {
            let f = &slices.slices()[l];
            for (g, df) in grad[i].iter_mut().zip(f.gradient(&q.atoms()[i])) {
                *g += diff.signum() * df;
            }
        }
    }
    Ok(grad)
}

/// One backtracking descent step on the A-GSWD between `q_a` and `p_opt`
/// over the atoms of `q_a` (weights fixed). Starting from `step_size`, the
/// step is halved up to [`MAX_HALVINGS`] times until the distance drops.
pub fn variational_step(
    q_a: &DiscreteMeasure,
    p_opt: &DiscreteMeasure,
    k: Order,
    slices: &SliceParameterSet,
    step_size: f64,
) -> Result<VariationalStep> {
    if !(step_size > 0.0) || !step_size.is_finite() {
        return Err(validation(format!("step size must be positive, got {step_size}")));
    }
    let before = agswd(q_a, p_opt, k, slices)?;
    let gradient = objective_gradient(q_a, p_opt, k, slices)?;
    let unchanged = |gradient: Vec<Vec<f64>>| VariationalStep {
        measure: q_a.clone(),
        gradient,
        distance_before: before,
        distance_after: before,
        step_used: 0.0,
    };
    if gradient.iter().flatten().all(|&g| g == 0.0) {
        return Ok(unchanged(gradient));
    }
    let mut eta = step_size;
    for _ in 0..=MAX_HALVINGS {
        let atoms = q_a
            .atoms()
            .iter()
            .zip(&gradient)
            .map(|(x, g)| x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect())
            .collect();
        let candidate = q_a.with_atoms(atoms)?;
        let after = agswd(&candidate, p_opt, k, slices)?;
        if after < before {
            return Ok(VariationalStep {
                measure: candidate,
                gradient,
                distance_before: before,
                distance_after: after,
                step_used: eta,
            });
        }
        eta *= 0.5;
    }
    Ok(unchanged(gradient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot_metrics::DefiningFunction;

    fn line() -> SliceParameterSet {
        SliceParameterSet::new(vec![DefiningFunction::linear(vec![1.0]).unwrap()]).unwrap()
    }

    #[test]
    fn identical_measures_do_not_move() {
        let q = DiscreteMeasure::uniform(vec![vec![0.3], vec![1.2]]).unwrap();
        let s = variational_step(&q, &q, Order::Finite(2.0), &line(), 0.5).unwrap();
        assert_eq!(s.step_used, 0.0);
        assert_eq!(s.measure.atoms(), q.atoms());
    }

    #[test]
    fn quadratic_single_atom() {
        let q = DiscreteMeasure::uniform(vec![vec![0.0]]).unwrap();
        let p = DiscreteMeasure::uniform(vec![vec![1.0]]).unwrap();
        let s = variational_step(&q, &p, Order::Finite(2.0), &line(), 0.25).unwrap();
        assert_eq!(s.gradient, vec![vec![-2.0]]);
        assert_eq!(s.measure.atoms()[0][0], 0.5);
        assert!(s.distance_after < s.distance_before);
    }

    #[test]
    fn infinity_moves_worst_atom() {
        let q = DiscreteMeasure::uniform(vec![vec![0.0], vec![5.0]]).unwrap();
        let p = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let s = variational_step(&q, &p, Order::Infinity, &line(), 1.0).unwrap();
        assert_eq!(s.gradient, vec![vec![0.0], vec![1.0]]);
        assert!(s.distance_after < s.distance_before);
    }
}
