//! Empirical convergence-rate exponent of a learning curve.
//!
//! The curve is smoothed with a centered moving average (window 20) and the
//! burn-in prefix is dropped. The gap to the limit return is then regressed
//! on `log t`. Using the best observed return as the limit pins the gap to
//! zero at its argmax and flattens the tail, so the limit `R∞` is estimated
//! instead: `S(t) ≈ R∞ − c t^{−α}` is fitted by variable projection (linear
//! least squares in `R∞, c` for each `α`, golden-section search over `α`).
//! The reported exponent is minus the OLS slope of `log(R∞ − S(t))` against
//! `log t`, with the usual slope standard error.

use crate::error::{validation, Result};

pub const SMOOTHING_WINDOW: usize = 20;
pub const DEFAULT_BURN_IN: f64 = 0.2;
/// Points required after burn-in, smoothing and gap filtering.
pub const MIN_FIT_POINTS: usize = 50;

const ALPHA_RANGE: (f64, f64) = (0.01, 5.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub stderr: f64,
    /// Fitted limit return `R∞`.
    pub asymptote: f64,
    pub points_used: usize,
    /// Points whose smoothed return reached `R∞` (non-positive gap).
    pub points_dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateOutcome {
    Fitted(RateFit),
    /// The fit was not possible; the string says why.
    Skipped(String),
}

impl RateOutcome {
    pub fn fitted(&self) -> Option<&RateFit> {
        match self {
            RateOutcome::Fitted(f) => Some(f),
            RateOutcome::Skipped(_) => None,
        }
    }
}

/// Centered moving average; entry `i` of the result belongs to episode
/// `i + window/2` and only full windows are kept.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    values.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

/// `(slope, intercept, slope stderr)` of ordinary least squares.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, intercept, stderr)
}

/// Best `(R∞, c, sse)` for a fixed `α`: `S ≈ R∞ − c u` with `u = t^{−α}`.
fn project(t: &[f64], s: &[f64], alpha: f64) -> (f64, f64, f64) {
    let u: Vec<f64> = t.iter().map(|v| v.powf(-alpha)).collect();
    let (slope, intercept, _) = ols(&u, s);
    let sse = u.iter().zip(s).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (intercept, -slope, sse)
}

fn fit_alpha(t: &[f64], s: &[f64]) -> f64 {
    let sse = |a: f64| project(t, s, a).2;
    // coarse log grid first: the objective can have several local minima
    let (lo, hi) = (ALPHA_RANGE.0.ln(), ALPHA_RANGE.1.ln());
    let grid = 200;
    let at = |k: usize| (lo + (hi - lo) * k as f64 / grid as f64).exp();
    let best = (0..=grid)
        .min_by(|&a, &b| sse(at(a)).total_cmp(&sse(at(b))))
        .unwrap_or(0);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(grid)));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Rate exponent of a return curve (one value per episode, episode `t`
/// counted from 1).
pub fn fit_rate(returns: &[f64], burn_in: f64) -> Result<RateOutcome> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(validation(format!("burn-in fraction {burn_in} outside [0, 1)")));
    }
    if returns.iter().any(|v| !v.is_finite()) {
        return Err(validation("curve contains non-finite returns"));
    }
    let smoothed = moving_average(returns, SMOOTHING_WINDOW);
    let first = (burn_in * returns.len() as f64).ceil() as usize;
    let half = SMOOTHING_WINDOW / 2;
    let (t, s): (Vec<f64>, Vec<f64>) = smoothed
        .iter()
        .enumerate()
        .map(|(i, &v)| (i + half, v))
        .filter(|&(episode, _)| episode >= first)
        // a window over 1-based episodes i+1..=i+W is centred on i + W/2 + 0.5
        .map(|(episode, v)| (episode as f64 + 0.5, v))
        .unzip();
    if t.len() < MIN_FIT_POINTS {
        return Err(validation(format!(
            "only {} smoothed points after burn-in, need {MIN_FIT_POINTS}",
            t.len()
        )));
    }
    let alpha = fit_alpha(&t, &s);
    let (asymptote, c, _) = project(&t, &s, alpha);
    if !(c > 0.0) {
        return Ok(RateOutcome::Skipped("smoothed curve does not approach a limit from below".into()));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&ti, &si) in t.iter().zip(&s) {
        let gap = asymptote - si;
        if gap > 0.0 {
            x.push(ti.ln());
            y.push(gap.ln());
        }
    }
    let dropped = t.len() - x.len();
    if x.len() < MIN_FIT_POINTS {
        return Ok(RateOutcome::Skipped(format!(
            "{dropped} of {} smoothed gaps are non-positive",
            t.len()
        )));
    }
    let (slope, _, stderr) = ols(&x, &y);
    Ok(RateOutcome::Fitted(RateFit {
        exponent: -slope,
        stderr,
        asymptote,
        points_used: x.len(),
        points_dropped: dropped,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(alpha: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|t| -200.0 * (t as f64).powf(-alpha)).collect()
    }

    #[test]
    fn recovers_power_laws() {
        for alpha in [0.5, 1.2] {
            let fit = fit_rate(&synthetic(alpha, 300), DEFAULT_BURN_IN).unwrap();
            let fit = fit.fitted().expect("fit");
            assert!((fit.exponent - alpha).abs() < 0.02, "{alpha}: {}", fit.exponent);
            assert!(fit.asymptote.abs() < 1.0);
        }
    }

    #[test]
    fn flat_or_short_curves() {
        assert!(matches!(fit_rate(&[1.0; 300], 0.2).unwrap(), RateOutcome::Skipped(_)));
        assert!(fit_rate(&[1.0; 40], 0.2).is_err());
        assert!(fit_rate(&[1.0; 300], 1.0).is_err());
    }
}
