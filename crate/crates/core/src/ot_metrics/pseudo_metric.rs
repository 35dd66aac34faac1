use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;

use super::defining::SliceParameterSet;
use super::measure::{DiscreteMeasure, Order};
use super::sliced::agswd;

/// Three measures sharing one slice set.
#[derive(Debug, Clone)]
pub struct MeasureTriple {
    pub first: DiscreteMeasure,
    pub second: DiscreteMeasure,
    pub third: DiscreteMeasure,
    pub slices: SliceParameterSet,
}

/// Largest violation observed for each pseudo-metric axiom.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PseudoMetricReport {
    pub trials: usize,
    /// `max(0, -d(x, y))`
    pub non_negativity: f64,
    /// `|d(x, y) - d(y, x)|`
    pub symmetry: f64,
    /// `max(0, d(x, z) - d(x, y) - d(y, z))`
    pub triangle: f64,
    /// `d(x, x)`
    pub self_distance: f64,
}

impl PseudoMetricReport {
    /// Non-negativity and self-distance exact, the other two within tolerance.
    pub fn holds(&self, symmetry_tol: f64, triangle_tol: f64) -> bool {
        self.non_negativity == 0.0
            && self.self_distance == 0.0
            && self.symmetry <= symmetry_tol
            && self.triangle <= triangle_tol
    }
}

/// Runs all four axioms over `trials` sampled triples.
pub fn check_pseudo_metric<F>(mut sampler: F, k: Order, trials: usize) -> Result<PseudoMetricReport>
where
    F: FnMut(usize) -> Result<MeasureTriple>,
{
    let mut report = PseudoMetricReport {
        trials,
        ..Default::default()
    };
    for t in 0..trials {
        let MeasureTriple {
            first,
            second,
            third,
            slices,
        } = sampler(t)?;
        let d = |a: &DiscreteMeasure, b: &DiscreteMeasure| agswd(a, b, k, &slices);
        let d12 = d(&first, &second)?;
        let d21 = d(&second, &first)?;
        let d23 = d(&second, &third)?;
        let d13 = d(&first, &third)?;
        let d31 = d(&third, &first)?;
        for v in [d12, d21, d23, d13, d31] {
            report.non_negativity = report.non_negativity.max(-v).max(0.0);
        }
        report.symmetry = report.symmetry.max((d12 - d21).abs()).max((d13 - d31).abs());
        report.triangle = report.triangle.max(d13 - d12 - d23).max(0.0);
        for m in [&first, &second, &third] {
            report.self_distance = report.self_distance.max(d(m, m)?);
        }
    }
    Ok(report)
}

/// Random measure triples for [`check_pseudo_metric`].
#[derive(Debug, Clone)]
pub struct RandomTripleSampler {
    pub dim: usize,
    pub max_atoms: usize,
    pub num_slices: usize,
    /// `None` samples linear slices, `Some(m)` odd-degree polynomial slices.
    pub degree: Option<u32>,
}

impl RandomTripleSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MeasureTriple> {
        let measure = |rng: &mut R| -> Result<DiscreteMeasure> {
            let n = rng.random_range(1..=self.max_atoms);
            let atoms = (0..n)
                .map(|_| (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            DiscreteMeasure::new(atoms, raw.iter().map(|w| w / total).collect())
        };
        let first = measure(rng)?;
        let second = measure(rng)?;
        let third = measure(rng)?;
        let slices = match self.degree {
            None => SliceParameterSet::random_linear(self.dim, self.num_slices, rng)?,
            Some(m) => SliceParameterSet::random_polynomial(self.dim, m, self.num_slices, rng)?,
        };
        Ok(MeasureTriple {
            first,
            second,
            third,
            slices,
        })
    }
}
