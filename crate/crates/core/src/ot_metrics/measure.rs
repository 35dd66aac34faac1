use crate::error::{domain, validation, Result};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Absolute distance under which two 1-D positions are treated as the same atom.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Order `k` of a Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Finite(f64),
    Infinity,
}

impl Order {
    pub fn new(k: f64) -> Result<Self> {
        let order = if k.is_infinite() && k > 0.0 {
            Order::Infinity
        } else {
            Order::Finite(k)
        };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Order::Finite(k) if !(k >= 1.0) || !k.is_finite() => {
                Err(domain(format!("Wasserstein order must be >= 1, got {k}")))
            }
            _ => Ok(()),
        }
    }

    /// `|d|^k`; only meaningful for finite orders.
    #[inline]
    pub(crate) fn cost(&self, d: f64) -> f64 {
        match *self {
            Order::Finite(k) if k == 1.0 => d.abs(),
            Order::Finite(k) if k == 2.0 => d * d,
            Order::Finite(k) => d.abs().powf(k),
            Order::Infinity => d.abs(),
        }
    }

    /// Inverse of [`Order::cost`] applied to an aggregated cost.
    #[inline]
    pub(crate) fn root(&self, c: f64) -> f64 {
        match *self {
            Order::Finite(k) if k == 1.0 => c,
            Order::Finite(k) if k == 2.0 => c.max(0.0).sqrt(),
            Order::Finite(k) => c.max(0.0).powf(1.0 / k),
            Order::Infinity => c,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Finite(k) => write!(f, "{k}"),
            Order::Infinity => write!(f, "inf"),
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(validation("measure must have at least one atom"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(validation(format!("weights must be finite and >= 0, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(validation(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Weighted atom cloud in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(validation(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(validation("atoms must have dimension >= 1"));
        }
        for a in &atoms {
            if a.len() != dim {
                return Err(validation(format!(
                    "mixed atom dimensions {} and {}",
                    dim,
                    a.len()
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(validation("atom coordinates must be finite"));
            }
        }
        Ok(Self {
            atoms,
            weights,
            dim,
        })
    }

    /// Equal weights `1/n`.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len().max(1);
        let weights = vec![1.0 / n as f64; atoms.len()];
        Self::new(atoms, weights)
    }

    /// One-dimensional cloud from scalar positions.
    pub fn from_scalars(positions: &[f64], weights: Vec<f64>) -> Result<Self> {
        Self::new(positions.iter().map(|&x| vec![x]).collect(), weights)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// True when every weight equals `1/n` to machine precision.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= 1e-15)
    }

    /// Same weights, new positions.
    pub fn with_atoms(&self, atoms: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(atoms, self.weights.clone())
    }
}

/// Canonical 1-D measure: strictly ascending positions, merged duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
    // cumulative weights with the final entry pinned to exactly 1
    cumulative: Vec<f64>,
}

impl OneDMeasure {
    /// Sorts, merges atoms closer than [`MERGE_TOLERANCE`], and validates mass.
    pub fn new(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(validation(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(validation("positions must be finite"));
        }
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));

        let mut merged_pos: Vec<f64> = Vec::with_capacity(positions.len());
        let mut merged_w: Vec<f64> = Vec::with_capacity(positions.len());
        for idx in order {
            let (x, w) = (positions[idx], weights[idx]);
            match merged_pos.last() {
                Some(&head) if x - head <= MERGE_TOLERANCE => {
                    *merged_w.last_mut().unwrap() += w;
                }
                _ => {
                    merged_pos.push(x);
                    merged_w.push(w);
                }
            }
        }
        Ok(Self::from_parts(merged_pos, merged_w))
    }

    /// Uniform weights over `positions`.
    pub fn uniform(positions: Vec<f64>) -> Result<Self> {
        let n = positions.len().max(1);
        let w = vec![1.0 / n as f64; positions.len()];
        Self::new(positions, w)
    }

    /// Dirac mass at `x`.
    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Accepts only input that is already canonical.
    pub fn from_canonical(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(validation("positions and weights differ in length"));
        }
        check_weights(&weights)?;
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(validation("positions must be finite"));
        }
        for pair in positions.windows(2) {
            if pair[1] - pair[0] <= MERGE_TOLERANCE {
                return Err(validation(format!(
                    "non-canonical measure: positions {} and {} are unsorted or duplicated",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self::from_parts(positions, weights))
    }

    fn from_parts(positions: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let n = cumulative.len();
        cumulative[n - 1] = 1.0;
        for c in cumulative.iter_mut() {
            *c = c.min(1.0);
        }
        Self {
            positions,
            weights,
            cumulative,
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    /// Left-continuous quantile function `inf { x : F(x) >= u }`.
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.positions[idx.min(self.positions.len() - 1)]
    }
}
