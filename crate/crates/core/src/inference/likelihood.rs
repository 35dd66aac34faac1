use crate::error::{validation, Result};

use super::operator::{RewardOperatorFamily, LIKELIHOOD_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub utilities: Vec<f64>,
}

/// A rollout together with its optimality likelihood once computed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub steps: Vec<TrajectoryStep>,
    /// `p(𝓞 | τ)`, set by [`optimality_likelihood`].
    pub likelihood: Option<f64>,
    /// Whether `r̃(τ)` had to be clipped into the family's range.
    pub clipped: bool,
}

impl TrajectoryRecord {
    pub fn new(steps: Vec<TrajectoryStep>) -> Self {
        Self {
            steps,
            likelihood: None,
            clipped: false,
        }
    }

    /// `r̃(τ) = Σ_t r_t`.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// `g̃^i(τ) = Σ_t g^i_t` for zero-based constraint index `i`.
    pub fn total_utility(&self, i: usize) -> Result<f64> {
        self.steps
            .iter()
            .map(|s| {
                s.utilities
                    .get(i)
                    .copied()
                    .ok_or_else(|| validation(format!("step has no utility {i}")))
            })
            .sum()
    }
}

/// `𝓕_r⁻¹(clip(r))` floored at [`LIKELIHOOD_FLOOR`]; the flag reports clipping.
pub fn likelihood_from_reward(r: f64, f: &RewardOperatorFamily) -> Result<(f64, bool)> {
    if !r.is_finite() {
        return Err(validation(format!("non-finite trajectory reward {r}")));
    }
    let clipped = f.clip(r);
    let p = f.inverse_r(clipped)?.clamp(LIKELIHOOD_FLOOR, 1.0);
    Ok((p, clipped != r))
}

/// Optimality likelihood `p(𝓞 | τ) = 𝓕_r⁻¹(r̃(τ))`, recorded on `traj`.
pub fn optimality_likelihood(traj: &mut TrajectoryRecord, f: &RewardOperatorFamily) -> Result<f64> {
    let (p, clipped) = likelihood_from_reward(traj.total_reward(), f)?;
    traj.likelihood = Some(p);
    traj.clipped = clipped;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(rewards: &[f64]) -> TrajectoryRecord {
        TrajectoryRecord::new(
            rewards
                .iter()
                .map(|&r| TrajectoryStep {
                    state: vec![],
                    action: vec![],
                    reward: r,
                    utilities: vec![0.0],
                })
                .collect(),
        )
    }

    #[test]
    fn affine_endpoints() {
        let f = RewardOperatorFamily::affine(0.0, 4.0).unwrap();
        let mut t = record(&[1.0, 3.0]);
        assert_eq!(optimality_likelihood(&mut t, &f).unwrap(), 1.0);
        let mut t = record(&[2.0]);
        assert_eq!(optimality_likelihood(&mut t, &f).unwrap(), 0.5);
        assert!(!t.clipped);
    }

    #[test]
    fn clipping_is_recorded_and_floored() {
        let f = RewardOperatorFamily::affine(0.0, 4.0).unwrap();
        let mut t = record(&[-3.0]);
        assert_eq!(optimality_likelihood(&mut t, &f).unwrap(), LIKELIHOOD_FLOOR);
        assert!(t.clipped);
        assert_eq!(t.likelihood, Some(LIKELIHOOD_FLOOR));
    }
}
