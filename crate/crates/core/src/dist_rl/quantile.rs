use crate::error::{validation, Result};
use crate::ot_metrics::{wasserstein_1d, OneDMeasure, Order};

/// `N` equally weighted, ascending atoms; atom `j` sits at level `(2j+1)/(2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDistribution {
    atoms: Vec<f64>,
}

impl QuantileDistribution {
    /// Rejects empty, unsorted or non-finite atoms.
    pub fn new(atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(validation("quantile distribution needs at least one atom"));
        }
        if atoms.iter().any(|q| !q.is_finite()) {
            return Err(validation("quantile atoms must be finite"));
        }
        if atoms.windows(2).any(|w| w[1] < w[0]) {
            return Err(validation("quantile atoms must be sorted ascending"));
        }
        Ok(Self { atoms })
    }

    /// Sorts `atoms` first.
    pub fn from_unsorted(mut atoms: Vec<f64>) -> Result<Self> {
        atoms.sort_by(f64::total_cmp);
        Self::new(atoms)
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.atoms.len() as f64
    }

    pub fn to_measure(&self) -> OneDMeasure {
        OneDMeasure::uniform(self.atoms.clone()).expect("quantile atoms are finite and non-empty")
    }
}

/// Midpoint levels `τ̂_j = (2j − 1) / (2N)`, `j = 1..N`.
pub fn quantile_levels(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (2 * j - 1) as f64 / (2 * n) as f64).collect()
}

/// `Π_{W1}`: the quantile function of `m` evaluated at the midpoint levels.
pub fn quantile_projection(m: &OneDMeasure, n: usize) -> Result<QuantileDistribution> {
    if n == 0 {
        return Err(validation("projection needs N >= 1"));
    }
    if m.is_empty() {
        return Err(validation("cannot project an empty measure"));
    }
    QuantileDistribution::new(quantile_levels(n).into_iter().map(|u| m.quantile(u)).collect())
}

/// `ζ^i(s, a)` for every state, action and signal index `i ∈ [0, p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionDistMap {
    num_signals: usize,
    num_states: usize,
    num_actions: usize,
    num_quantiles: usize,
    entries: Vec<QuantileDistribution>,
}

impl StateActionDistMap {
    /// Builds every entry from `init(i, s, a)`; all must have the same size.
    pub fn from_fn(
        num_signals: usize,
        num_states: usize,
        num_actions: usize,
        mut init: impl FnMut(usize, usize, usize) -> Result<QuantileDistribution>,
    ) -> Result<Self> {
        if num_signals == 0 || num_states == 0 || num_actions == 0 {
            return Err(validation("distribution map needs a non-empty index set"));
        }
        let mut entries = Vec::with_capacity(num_signals * num_states * num_actions);
        for i in 0..num_signals {
            for s in 0..num_states {
                for a in 0..num_actions {
                    entries.push(init(i, s, a)?);
                }
            }
        }
        let num_quantiles = entries[0].len();
        if entries.iter().any(|e| e.len() != num_quantiles) {
            return Err(validation("all entries need the same number of quantiles"));
        }
        Ok(Self {
            num_signals,
            num_states,
            num_actions,
            num_quantiles,
            entries,
        })
    }

    pub fn constant(num_signals: usize, num_states: usize, num_actions: usize, n: usize, value: f64) -> Result<Self> {
        let q = QuantileDistribution::constant(value, n)?;
        Self::from_fn(num_signals, num_states, num_actions, |_, _, _| Ok(q.clone()))
    }

    fn index(&self, i: usize, s: usize, a: usize) -> usize {
        assert!(
            i < self.num_signals && s < self.num_states && a < self.num_actions,
            "index ({i}, {s}, {a}) out of range"
        );
        (i * self.num_states + s) * self.num_actions + a
    }

    pub fn get(&self, i: usize, s: usize, a: usize) -> &QuantileDistribution {
        &self.entries[self.index(i, s, a)]
    }

    pub fn set(&mut self, i: usize, s: usize, a: usize, q: QuantileDistribution) -> Result<()> {
        if q.len() != self.num_quantiles {
            return Err(validation(format!("expected {} quantiles, got {}", self.num_quantiles, q.len())));
        }
        let idx = self.index(i, s, a);
        self.entries[idx] = q;
        Ok(())
    }

    pub fn num_signals(&self) -> usize {
        self.num_signals
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_quantiles(&self) -> usize {
        self.num_quantiles
    }

    fn same_shape(&self, other: &Self) -> bool {
        (self.num_signals, self.num_states, self.num_actions, self.num_quantiles)
            == (other.num_signals, other.num_states, other.num_actions, other.num_quantiles)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(validation("distribution maps have different index sets or quantile counts"))
        }
    }
}

/// `d̄_k`: the largest `W_k` between paired entries.
pub fn dbar(z1: &StateActionDistMap, z2: &StateActionDistMap, k: Order) -> Result<f64> {
    z1.check_same_shape(z2)?;
    k.validate()?;
    let mut worst: f64 = 0.0;
    for (a, b) in z1.entries.iter().zip(&z2.entries) {
        let d = match k {
            // equal-size uniform atoms pair up in sorted order
            Order::Infinity => a
                .atoms
                .iter()
                .zip(&b.atoms)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            Order::Finite(_) => wasserstein_1d(&a.to_measure(), &b.to_measure(), k)?,
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let d = quantile_projection(&OneDMeasure::dirac(3.0).unwrap(), 5).unwrap();
        assert_eq!(d.atoms(), &[3.0; 5]);
        let m = OneDMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(quantile_projection(&m, 2).unwrap().atoms(), &[0.0, 1.0]);
    }

    #[test]
    fn dbar_single_entry() {
        let mk = |atoms: Vec<f64>| {
            StateActionDistMap::from_fn(1, 1, 1, |_, _, _| QuantileDistribution::new(atoms.clone())).unwrap()
        };
        assert_eq!(dbar(&mk(vec![0.0, 1.0]), &mk(vec![0.0, 2.0]), Order::Infinity).unwrap(), 1.0);
        assert_eq!(dbar(&mk(vec![0.0, 1.0]), &mk(vec![0.0, 1.0]), Order::Finite(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn unsorted_rejected() {
        assert!(QuantileDistribution::new(vec![1.0, 0.0]).is_err());
        assert_eq!(QuantileDistribution::from_unsorted(vec![1.0, 0.0]).unwrap().atoms(), &[0.0, 1.0]);
    }
}
