//! Sliced distances: project both measures through a defining function and
//! average the 1-D transport cost over slices.

use crate::error::{validation, Result};
use crate::rng_from_seed;

use super::defining::{DefiningFunction, SliceParameterSet};
use super::measure::{DiscreteMeasure, OneDMeasure, Order};
use super::wasserstein::wasserstein_1d_power;

/// Push-forward of `measure` through `β(·, θ) - offset`.
pub fn project(measure: &DiscreteMeasure, f: &DefiningFunction, offset: f64) -> Result<OneDMeasure> {
    if f.dim() != measure.dim() {
        return Err(validation(format!(
            "slice dimension {} does not match measure dimension {}",
            f.dim(),
            measure.dim()
        )));
    }
    let positions = measure.atoms().iter().map(|x| f.eval(x) - offset).collect();
    OneDMeasure::new(positions, measure.weights().to_vec())
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(validation(format!(
            "measures live in different dimensions ({} vs {})",
            mu.dim(),
            nu.dim()
        )));
    }
    Ok(())
}

/// Per-slice `W_k^k` (or `W_∞`) values, in slice order.
pub fn sliced_costs(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    k: Order,
    slices: &SliceParameterSet,
) -> Result<Vec<f64>> {
    k.validate()?;
    check_pair(mu, nu)?;
    slices
        .slices()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let l = slices.offset(i);
            Ok(wasserstein_1d_power(&project(mu, f, l)?, &project(nu, f, l)?, k))
        })
        .collect()
}

/// Fixed-order aggregation of per-slice costs into the distance.
fn aggregate(costs: &[f64], k: Order) -> f64 {
    match k {
        Order::Infinity => costs.iter().copied().fold(0.0, f64::max),
        _ => k.root(costs.iter().sum::<f64>() / costs.len() as f64),
    }
}

/// Generalized sliced Wasserstein distance over an explicit slice set.
pub fn gswd(mu: &DiscreteMeasure, nu: &DiscreteMeasure, k: Order, slices: &SliceParameterSet) -> Result<f64> {
    Ok(aggregate(&sliced_costs(mu, nu, k, slices)?, k))
}

/// A-GSWD: the same computation over slices chosen by the actor network.
pub fn agswd(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    k: Order,
    rl_slices: &SliceParameterSet,
) -> Result<f64> {
    gswd(mu, nu, k, rl_slices)
}

/// Monte-Carlo sliced Wasserstein distance over `num_projections` directions
/// drawn uniformly on the sphere.
pub fn swd(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    k: Order,
    num_projections: usize,
    rng_seed: u64,
) -> Result<f64> {
    if num_projections == 0 {
        return Err(validation("num_projections must be >= 1"));
    }
    check_pair(mu, nu)?;
    let mut rng = rng_from_seed(rng_seed);
    let slices = SliceParameterSet::random_linear(mu.dim(), num_projections, &mut rng)?;
    gswd(mu, nu, k, &slices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot_metrics::wasserstein_1d;

    #[test]
    fn linear_projection_examples() {
        let m = DiscreteMeasure::uniform(vec![vec![1.0, 1.0]]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let f = DefiningFunction::linear(vec![s, s]).unwrap();
        let p = project(&m, &f, 0.0).unwrap();
        assert!((p.positions()[0] - 2f64.sqrt()).abs() < 1e-15);

        let cubic = DefiningFunction::polynomial(1, 3, vec![1.0]).unwrap();
        let m = DiscreteMeasure::uniform(vec![vec![2.0]]).unwrap();
        assert_eq!(project(&m, &cubic, 0.0).unwrap().positions(), &[8.0]);
    }

    #[test]
    fn one_dimensional_identity_projection() {
        let m = DiscreteMeasure::from_scalars(&[0.5, -1.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let f = DefiningFunction::linear(vec![1.0]).unwrap();
        let p = project(&m, &f, 0.0).unwrap();
        assert_eq!(p.positions(), &[-1.0, 0.5, 3.0]);
        assert_eq!(p.weights(), &[0.3, 0.2, 0.5]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = DiscreteMeasure::uniform(vec![vec![1.0, 1.0]]).unwrap();
        let f = DefiningFunction::linear(vec![1.0]).unwrap();
        assert!(project(&m, &f, 0.0).is_err());
    }

    #[test]
    fn swd_in_one_dimension_is_exact() {
        let a = DiscreteMeasure::from_scalars(&[0.0, 1.0, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        let b = DiscreteMeasure::from_scalars(&[2.0, -1.0], vec![0.6, 0.4]).unwrap();
        let pa = OneDMeasure::new(vec![0.0, 1.0, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        let pb = OneDMeasure::new(vec![2.0, -1.0], vec![0.6, 0.4]).unwrap();
        for k in [Order::Finite(1.0), Order::Finite(2.0), Order::Finite(3.0)] {
            let exact = wasserstein_1d(&pa, &pb, k).unwrap();
            for seed in 0..5 {
                let v = swd(&a, &b, k, 7, seed).unwrap();
                assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
            }
        }
    }

    #[test]
    fn offsets_cancel_between_two_measures() {
        let mut rng = crate::rng_from_seed(9);
        let a = DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let b = DiscreteMeasure::uniform(vec![vec![1.0, 1.0], vec![0.5, 0.0], vec![-2.0, 3.0]]).unwrap();
        let plain = SliceParameterSet::random_polynomial(2, 3, 6, &mut rng).unwrap();
        let shifted =
            SliceParameterSet::with_offsets(plain.slices().to_vec(), vec![0.3, -2.0, 5.0, 0.0, 1.0, -0.1]).unwrap();
        let k = Order::Finite(2.0);
        let d0 = gswd(&a, &b, k, &plain).unwrap();
        let d1 = gswd(&a, &b, k, &shifted).unwrap();
        assert!((d0 - d1).abs() < 1e-9);
    }
}
