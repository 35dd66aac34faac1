//! Control as inference: reward operator families, optimality likelihoods,
//! trajectory posteriors, the sliced variational step, action sampling, and
//! latent-factor interpretation.

mod interpret;
mod likelihood;
mod operator;
mod posterior;
mod variational;

pub use interpret::{
    decompose_interpretation, interpret_trace, write_interpretation, FactorInterpretation, InterpretationRow,
    LatentFactorModel,
};
pub use likelihood::{likelihood_from_reward, optimality_likelihood, TrajectoryRecord, TrajectoryStep};
pub use operator::{
    check_conditions, ConditionReport, OperatorKind, RewardOperatorFamily, CONDITION_GRID_START, LIKELIHOOD_FLOOR,
};
pub use posterior::{trajectory_posterior, LogPosterior, TabularPolicyModel, TabularTrajectory, TrajectoryModel};
pub use variational::{objective_gradient, variational_step, VariationalStep, MAX_HALVINGS};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{validation, Result};
use crate::ot_metrics::DiscreteMeasure;

/// Draws `count` atoms of `posterior` with probability equal to their weight.
pub fn sample_actions(posterior: &DiscreteMeasure, count: usize, rng_seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = crate::rng_from_seed(rng_seed);
    sample_actions_with(posterior, count, &mut rng)
}

pub fn sample_actions_with<R: rand::Rng + ?Sized>(
    posterior: &DiscreteMeasure,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if posterior.is_empty() {
        return Err(validation("cannot sample from an empty measure"));
    }
    let dist = WeightedIndex::new(posterior.weights()).map_err(|e| validation(e.to_string()))?;
    Ok((0..count)
        .map(|_| posterior.atoms()[dist.sample(rng)].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_always_drawn() {
        let m = DiscreteMeasure::uniform(vec![vec![0.7, -1.0]]).unwrap();
        assert!(sample_actions(&m, 50, 3).unwrap().iter().all(|a| a == &vec![0.7, -1.0]));
    }

    #[test]
    fn zero_weight_never_drawn() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        assert!(sample_actions(&m, 1000, 9).unwrap().iter().all(|a| a[0] == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(sample_actions(&m, 20, 5).unwrap(), sample_actions(&m, 20, 5).unwrap());
    }
}
