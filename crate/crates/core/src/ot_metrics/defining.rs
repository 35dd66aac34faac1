//! Defining functions `β(x, θ)` for generalized Radon slicing.
//!
//! Two families are supported: linear projections `⟨x, θ⟩` with `θ` on the
//! unit sphere, and homogeneous polynomials `Σ_{|α|=m} θ_α x^α` of odd degree
//! `m` with a unit-norm coefficient vector. Odd degree keeps the slice
//! injective, which is what makes the sliced distance a metric rather than
//! only a pseudo-metric.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{validation, Result};

/// Unit-norm tolerance for directions and coefficient vectors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

/// Default polynomial degree.
pub const DEFAULT_DEGREE: u32 = 3;

/// All multi-indices `α ∈ N^dim` with `|α| = degree`, in descending
/// lexicographic order (so `x_1^m` comes first).
pub fn monomial_exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(pos: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let dim = current.len();
        if pos == dim - 1 {
            current[pos] = remaining;
            out.push(current.clone());
            return;
        }
        for e in (0..=remaining).rev() {
            current[pos] = e;
            fill(pos + 1, remaining - e, current, out);
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    let mut current = vec![0; dim];
    fill(0, degree, &mut current, &mut out);
    out
}

/// Number of monomials of total degree `degree` in `dim` variables.
pub fn monomial_count(dim: usize, degree: u32) -> usize {
    // C(degree + dim - 1, dim - 1)
    let (n, k) = (degree as usize + dim - 1, dim - 1);
    let mut c = 1usize;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Linear {
        direction: Vec<f64>,
    },
    Polynomial {
        dim: usize,
        degree: u32,
        exponents: Vec<Vec<u32>>,
        coefficients: Vec<f64>,
    },
}

/// Scalar projection rule used to slice a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DefiningFunction {
    kind: Kind,
}

impl DefiningFunction {
    /// Linear slice; `direction` must already have unit norm.
    pub fn linear(direction: Vec<f64>) -> Result<Self> {
        if direction.is_empty() || direction.iter().any(|x| !x.is_finite()) {
            return Err(validation("direction must be a finite non-empty vector"));
        }
        let n = norm(&direction);
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(validation(format!("direction has norm {n}, expected 1")));
        }
        Ok(Self {
            kind: Kind::Linear { direction },
        })
    }

    /// Linear slice along `v / ‖v‖`.
    pub fn linear_normalized(v: &[f64]) -> Result<Self> {
        let n = norm(v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(validation("cannot normalize a zero or non-finite direction"));
        }
        Self::linear(v.iter().map(|x| x / n).collect())
    }

    /// Homogeneous polynomial slice of odd `degree` with unit-norm coefficients,
    /// ordered as in [`monomial_exponents`].
    pub fn polynomial(dim: usize, degree: u32, coefficients: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(validation("polynomial slice needs dimension >= 1"));
        }
        if degree % 2 == 0 {
            return Err(validation(format!("polynomial degree must be odd, got {degree}")));
        }
        let exponents = monomial_exponents(dim, degree);
        if coefficients.len() != exponents.len() {
            return Err(validation(format!(
                "expected {} coefficients for dim {dim}, degree {degree}; got {}",
                exponents.len(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|x| !x.is_finite()) {
            return Err(validation("coefficients must be finite"));
        }
        let n = norm(&coefficients);
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(validation(format!("coefficient vector has norm {n}, expected 1")));
        }
        Ok(Self {
            kind: Kind::Polynomial {
                dim,
                degree,
                exponents,
                coefficients,
            },
        })
    }

    /// Polynomial slice from raw coefficients, normalized to unit norm.
    /// Returns `None` when the raw vector has (numerically) zero norm.
    pub fn polynomial_normalized(dim: usize, degree: u32, raw: &[f64]) -> Result<Option<Self>> {
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(validation("non-finite slice coefficients"));
        }
        let n = norm(raw);
        if n <= UNIT_NORM_TOLERANCE {
            return Ok(None);
        }
        let mut coefficients: Vec<f64> = raw.iter().map(|x| x / n).collect();
        // one more pass pulls the norm within a few ulps of 1
        let n2 = norm(&coefficients);
        coefficients.iter_mut().for_each(|c| *c /= n2);
        Self::polynomial(dim, degree, coefficients).map(Some)
    }

    /// Canonical polynomial slice: coefficient 1 on `x_1^m`, 0 elsewhere.
    pub fn canonical_polynomial(dim: usize, degree: u32) -> Result<Self> {
        let mut c = vec![0.0; monomial_count(dim, degree)];
        c[0] = 1.0;
        Self::polynomial(dim, degree, c)
    }

    /// Direction drawn uniformly on `S^{dim-1}`.
    pub fn random_linear<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(f) = Self::linear_normalized(&v) {
                return f;
            }
        }
    }

    /// Coefficients drawn uniformly on the unit sphere of coefficient space.
    pub fn random_polynomial<R: Rng + ?Sized>(dim: usize, degree: u32, rng: &mut R) -> Result<Self> {
        let count = monomial_count(dim, degree);
        loop {
            let v: Vec<f64> = (0..count).map(|_| rng.sample(StandardNormal)).collect();
            if let Some(f) = Self::polynomial_normalized(dim, degree, &v)? {
                return Ok(f);
            }
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Linear { direction } => direction.len(),
            Kind::Polynomial { dim, .. } => *dim,
        }
    }

    /// Degree of positive homogeneity (1 for linear slices).
    pub fn degree(&self) -> u32 {
        match &self.kind {
            Kind::Linear { .. } => 1,
            Kind::Polynomial { degree, .. } => *degree,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, Kind::Linear { .. })
    }

    /// Direction for linear slices, coefficient vector for polynomial ones.
    pub fn parameters(&self) -> &[f64] {
        match &self.kind {
            Kind::Linear { direction } => direction,
            Kind::Polynomial { coefficients, .. } => coefficients,
        }
    }

    /// `β(x, θ)`. `x` must have length [`Self::dim`].
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Linear { direction } => direction.iter().zip(x).map(|(a, b)| a * b).sum(),
            Kind::Polynomial {
                exponents,
                coefficients,
                ..
            } => exponents
                .iter()
                .zip(coefficients)
                .map(|(alpha, c)| {
                    c * alpha
                        .iter()
                        .zip(x)
                        .map(|(&e, &xi)| xi.powi(e as i32))
                        .product::<f64>()
                })
                .sum(),
        }
    }

    /// `∇_x β(x, θ)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Linear { direction } => direction.clone(),
            Kind::Polynomial {
                dim,
                exponents,
                coefficients,
                ..
            } => {
                let mut g = vec![0.0; *dim];
                for (alpha, c) in exponents.iter().zip(coefficients) {
                    if *c == 0.0 {
                        continue;
                    }
                    for (j, gj) in g.iter_mut().enumerate() {
                        if alpha[j] == 0 {
                            continue;
                        }
                        let mut term = c * alpha[j] as f64;
                        for (l, (&e, &xl)) in alpha.iter().zip(x).enumerate() {
                            let e = if l == j { e - 1 } else { e };
                            term *= xl.powi(e as i32);
                        }
                        *gj += term;
                    }
                }
                g
            }
        }
    }
}

/// The set of slices a sliced distance averages over, with optional offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceParameterSet {
    slices: Vec<DefiningFunction>,
    offsets: Option<Vec<f64>>,
}

impl SliceParameterSet {
    pub fn new(slices: Vec<DefiningFunction>) -> Result<Self> {
        if slices.is_empty() {
            return Err(validation("slice set must be non-empty"));
        }
        let d = slices[0].dim();
        if slices.iter().any(|s| s.dim() != d) {
            return Err(validation("slices in one set must share a dimension"));
        }
        Ok(Self {
            slices,
            offsets: None,
        })
    }

    pub fn with_offsets(slices: Vec<DefiningFunction>, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != slices.len() {
            return Err(validation("one offset per slice required"));
        }
        if offsets.iter().any(|x| !x.is_finite()) {
            return Err(validation("offsets must be finite"));
        }
        let mut s = Self::new(slices)?;
        s.offsets = Some(offsets);
        Ok(s)
    }

    /// `count` random linear slices.
    pub fn random_linear<R: Rng + ?Sized>(dim: usize, count: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..count).map(|_| DefiningFunction::random_linear(dim, rng)).collect())
    }

    /// `count` random odd-degree polynomial slices.
    pub fn random_polynomial<R: Rng + ?Sized>(
        dim: usize,
        degree: u32,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let slices = (0..count)
            .map(|_| DefiningFunction::random_polynomial(dim, degree, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(slices)
    }

    pub fn slices(&self) -> &[DefiningFunction] {
        &self.slices
    }

    pub fn offsets(&self) -> Option<&[f64]> {
        self.offsets.as_deref()
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets.as_ref().map_or(0.0, |o| o[i])
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    /// Concatenation of two sets with the same dimension.
    pub fn pooled(sets: &[SliceParameterSet]) -> Result<Self> {
        let mut slices = Vec::new();
        let mut offsets = Vec::new();
        for (k, s) in sets.iter().enumerate() {
            slices.extend_from_slice(&s.slices);
            offsets.extend((0..s.len()).map(|i| s.offset(i)));
            if k > 0 && s.dim() != sets[0].dim() {
                return Err(validation("cannot pool slice sets of different dimension"));
            }
        }
        Self::with_offsets(slices, offsets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn exponent_enumeration() {
        assert_eq!(monomial_exponents(1, 3), vec![vec![3]]);
        let e = monomial_exponents(2, 3);
        assert_eq!(e, vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        for (d, m) in [(1, 1), (2, 3), (3, 3), (4, 3), (4, 5)] {
            assert_eq!(monomial_exponents(d, m).len(), monomial_count(d, m));
        }
        assert_eq!(monomial_count(4, 3), 20);
    }

    #[test]
    fn invariants_enforced() {
        assert!(DefiningFunction::linear(vec![1.0, 1.0]).is_err());
        assert!(DefiningFunction::polynomial(1, 2, vec![1.0]).is_err());
        assert!(DefiningFunction::polynomial(2, 3, vec![1.0, 0.0]).is_err());
        assert!(DefiningFunction::polynomial(1, 3, vec![0.5]).is_err());
        assert!(SliceParameterSet::new(vec![]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(3);
        let f = DefiningFunction::random_polynomial(3, 3, &mut rng).unwrap();
        let x = [0.3, -1.2, 0.7];
        let g = f.gradient(&x);
        for j in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8, "{fd} vs {}", g[j]);
        }
    }

    #[test]
    fn zero_raw_coefficients_have_no_normalization() {
        assert!(DefiningFunction::polynomial_normalized(2, 3, &[0.0; 4])
            .unwrap()
            .is_none());
    }
}
