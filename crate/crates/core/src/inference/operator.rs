//! Reward operator families mapping optimality likelihood `p ∈ (0, 1]` to
//! trajectory reward (`𝓕_r`, increasing) and utility (`𝓕_g`, decreasing).

use std::fmt;

use crate::error::{Error, Result};

/// Likelihoods are clamped to at least this value.
pub const LIKELIHOOD_FLOOR: f64 = 1e-9;

/// Lower end of the grid used by [`check_conditions`].
pub const CONDITION_GRID_START: f64 = 1e-6;

#[derive(Clone, Copy)]
pub enum OperatorKind {
    /// `𝓕_r(p) = r_min + (r_max − r_min) p`.
    Affine,
    /// `𝓕_r(p) = r_min + (r_max − r_min)(1 + ln p / L)`, `L = −ln(floor)`;
    /// constant `r_min` below the floor.
    Log { floor: f64 },
    /// Arbitrary maps; inverses are found by bisection on `[floor, 1]`.
    Custom {
        name: &'static str,
        forward_r: fn(f64) -> f64,
        forward_g: fn(f64) -> f64,
    },
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Affine => write!(f, "Affine"),
            OperatorKind::Log { floor } => write!(f, "Log {{ floor: {floor} }}"),
            OperatorKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// The pair `(𝓕_r, 𝓕_g)` with range `[r_min, r_max]`.
#[derive(Debug, Clone, Copy)]
pub struct RewardOperatorFamily {
    kind: OperatorKind,
    r_min: f64,
    r_max: f64,
}

impl RewardOperatorFamily {
    fn with_kind(kind: OperatorKind, r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite() && r_min < r_max) {
            return Err(Error::Config(format!("need finite r_min < r_max, got [{r_min}, {r_max}]")));
        }
        Ok(Self { kind, r_min, r_max })
    }

    pub fn affine(r_min: f64, r_max: f64) -> Result<Self> {
        Self::with_kind(OperatorKind::Affine, r_min, r_max)
    }

    pub fn log(r_min: f64, r_max: f64) -> Result<Self> {
        Self::with_kind(OperatorKind::Log { floor: LIKELIHOOD_FLOOR }, r_min, r_max)
    }

    pub fn custom(
        name: &'static str,
        r_min: f64,
        r_max: f64,
        forward_r: fn(f64) -> f64,
        forward_g: fn(f64) -> f64,
    ) -> Result<Self> {
        Self::with_kind(
            OperatorKind::Custom {
                name,
                forward_r,
                forward_g,
            },
            r_min,
            r_max,
        )
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    fn span(&self) -> f64 {
        self.r_max - self.r_min
    }

    pub fn forward_r(&self, p: f64) -> f64 {
        match self.kind {
            OperatorKind::Affine => self.r_min + self.span() * p,
            OperatorKind::Log { floor } => {
                let p = p.max(floor);
                self.r_min + self.span() * (1.0 + p.ln() / -floor.ln())
            }
            OperatorKind::Custom { forward_r, .. } => forward_r(p),
        }
    }

    pub fn forward_g(&self, p: f64) -> f64 {
        match self.kind {
            OperatorKind::Custom { forward_g, .. } => forward_g(p),
            // mirror image of the reward map
            _ => self.r_max + self.r_min - self.forward_r(p),
        }
    }

    /// `𝓕_r⁻¹(r)` for `r ∈ [r_min, r_max]`.
    pub fn inverse_r(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        match self.kind {
            OperatorKind::Affine => Ok((r - self.r_min) / self.span()),
            OperatorKind::Log { floor } => Ok((-floor.ln() * ((r - self.r_min) / self.span() - 1.0)).exp()),
            OperatorKind::Custom { forward_r, .. } => bisect(forward_r, r, true),
        }
    }

    /// `𝓕_g⁻¹(g)` for `g ∈ [r_min, r_max]`.
    pub fn inverse_g(&self, g: f64) -> Result<f64> {
        self.check_range(g)?;
        match self.kind {
            OperatorKind::Custom { forward_g, .. } => bisect(forward_g, g, false),
            // the mirrored value can round one ulp past the range ends
            _ => self.inverse_r(self.clip(self.r_max + self.r_min - g)),
        }
    }

    fn check_range(&self, r: f64) -> Result<()> {
        if !(self.r_min <= r && r <= self.r_max) {
            return Err(Error::Domain(format!("{r} outside [{}, {}]", self.r_min, self.r_max)));
        }
        Ok(())
    }

    pub fn clip(&self, r: f64) -> f64 {
        r.clamp(self.r_min, self.r_max)
    }
}

/// Bisection for `f(p) = target` on `[floor, 1]`, assuming monotonicity in
/// the stated direction; fails when the target lies outside the bracket.
fn bisect(f: fn(f64) -> f64, target: f64, increasing: bool) -> Result<f64> {
    let (mut lo, mut hi) = (LIKELIHOOD_FLOOR, 1.0);
    let sign = if increasing { 1.0 } else { -1.0 };
    let g = |p: f64| sign * (f(p) - target);
    let (glo, ghi) = (g(lo), g(hi));
    if glo > 1e-12 || ghi < -1e-12 {
        return Err(Error::Config(format!("operator cannot be inverted at {target}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of [`check_conditions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub grid_size: usize,
    /// Largest `𝓕_r(p_j) − 𝓕_r(p_{j+1})` (should be negative).
    pub reward_monotonicity: f64,
    /// Largest `𝓕_g(p_{j+1}) − 𝓕_g(p_j)` (should be negative).
    pub utility_monotonicity: f64,
    /// Distance of the endpoint images from `[r_min, r_max]`.
    pub reward_range_gap: f64,
    pub utility_range_gap: f64,
    /// Largest `|𝓕⁻¹(𝓕(p)) − p|` over the grid, `∞` if inversion failed.
    pub round_trip: f64,
}

impl ConditionReport {
    pub fn reward_increasing(&self) -> bool {
        self.reward_monotonicity < 0.0
    }

    pub fn utility_decreasing(&self) -> bool {
        self.utility_monotonicity < 0.0
    }

    pub fn passed(&self) -> bool {
        self.reward_increasing()
            && self.utility_decreasing()
            && self.reward_range_gap <= 1e-9
            && self.utility_range_gap <= 1e-9
            && self.round_trip <= 1e-10
    }
}

/// Checks both Conditions on a uniform grid over `[1e-6, 1]`; the range
/// check also probes `p = 1e-12` as a stand-in for the open end at 0.
pub fn check_conditions(f: &RewardOperatorFamily, grid_size: usize) -> Result<ConditionReport> {
    if grid_size < 3 {
        return Err(Error::Validation("condition grid needs at least 3 points".into()));
    }
    let grid: Vec<f64> = (0..grid_size)
        .map(|j| CONDITION_GRID_START + (1.0 - CONDITION_GRID_START) * j as f64 / (grid_size - 1) as f64)
        .collect();
    let fr: Vec<f64> = grid.iter().map(|&p| f.forward_r(p)).collect();
    let fg: Vec<f64> = grid.iter().map(|&p| f.forward_g(p)).collect();
    let worst = |v: &[f64], sign: f64| v.windows(2).map(|w| sign * (w[0] - w[1])).fold(f64::NEG_INFINITY, f64::max);
    let near_zero = 1e-12;
    let gap = |low: f64, high: f64| (low - f.r_min).abs().max((high - f.r_max).abs());
    let mut round_trip: f64 = 0.0;
    for &p in &grid {
        // the log family clamps below its floor, which the grid stays above
        let back_r = f.inverse_r(f.clip(f.forward_r(p)));
        let back_g = f.inverse_g(f.clip(f.forward_g(p)));
        match (back_r, back_g) {
            (Ok(a), Ok(b)) => round_trip = round_trip.max((a - p).abs()).max((b - p).abs()),
            _ => round_trip = f64::INFINITY,
        }
    }
    let finite = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    Ok(ConditionReport {
        grid_size,
        reward_monotonicity: finite(worst(&fr, 1.0)),
        utility_monotonicity: finite(worst(&fg, -1.0)),
        reward_range_gap: finite(gap(f.forward_r(near_zero), f.forward_r(1.0))),
        utility_range_gap: finite(gap(f.forward_g(1.0), f.forward_g(near_zero))),
        round_trip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_log_pass() {
        assert!(check_conditions(&RewardOperatorFamily::affine(-1.0, 3.0).unwrap(), 1001).unwrap().passed());
        assert!(check_conditions(&RewardOperatorFamily::log(0.0, 250.0).unwrap(), 1001).unwrap().passed());
    }

    #[test]
    fn oscillating_family_fails_monotonicity() {
        let f = RewardOperatorFamily::custom("sin", -1.0, 1.0, |p| (20.0 * p).sin(), |p| -(20.0 * p).sin()).unwrap();
        let report = check_conditions(&f, 1001).unwrap();
        assert!(!report.reward_increasing());
        assert!(!report.passed());
    }

    #[test]
    fn mirrored_inverse_tolerates_rounding() {
        let f = RewardOperatorFamily::affine(-6.492942015067523, -6.492942015067523 + 2.5263316247798).unwrap();
        assert!(check_conditions(&f, 101).unwrap().passed());
    }

    #[test]
    fn affine_inverse_examples() {
        let f = RewardOperatorFamily::affine(0.0, 10.0).unwrap();
        assert_eq!(f.inverse_r(10.0).unwrap(), 1.0);
        assert_eq!(f.inverse_r(5.0).unwrap(), 0.5);
        assert_eq!(f.inverse_g(10.0).unwrap(), 0.0);
    }

    #[test]
    fn custom_bisection_inverse() {
        let f = RewardOperatorFamily::custom("cube", 0.0, 1.0, |p| p * p * p, |p| 1.0 - p * p * p).unwrap();
        let p = f.inverse_r(0.3).unwrap();
        assert!((f.forward_r(p) - 0.3).abs() < 1e-12);
    }
}
