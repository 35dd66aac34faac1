//! Exact Wasserstein distance between 1-D measures.
//!
//! On the line the optimal coupling is the monotone (quantile) coupling, so
//! `W_k^k = ∫_0^1 |F_μ^{-1}(u) - F_ν^{-1}(u)|^k du`. Both quantile functions
//! are step functions; merging their cumulative-weight breakpoints gives the
//! integral exactly as a finite sum.

use crate::error::Result;

use super::measure::{OneDMeasure, Order, MERGE_TOLERANCE};

/// Walks the merged breakpoint sequence of two cumulative-weight arrays and
/// calls `visit(i, j, mass)` for every segment of positive length, where `i`
/// and `j` index the atoms active on that segment.
pub(crate) fn merge_breakpoints(cum_a: &[f64], cum_b: &[f64], mut visit: impl FnMut(usize, usize, f64)) {
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0f64;
    while i < cum_a.len() && j < cum_b.len() {
        let next = cum_a[i].min(cum_b[j]);
        let len = next - prev;
        if len > 0.0 {
            visit(i, j, len);
            prev = next;
        }
        if cum_a[i] <= next {
            i += 1;
        }
        if cum_b[j] <= next {
            j += 1;
        }
    }
}

/// Monotone coupling between two weighted point sets given in arbitrary
/// order. Returns `(index_in_a, index_in_b, mass)` triples referring to the
/// caller's original indexing.
pub fn monotone_coupling(
    pos_a: &[f64],
    w_a: &[f64],
    pos_b: &[f64],
    w_b: &[f64],
) -> Vec<(usize, usize, f64)> {
    fn sorted_cumulative(pos: &[f64], w: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let mut order: Vec<usize> = (0..pos.len()).collect();
        order.sort_by(|&a, &b| pos[a].total_cmp(&pos[b]));
        let mut acc = 0.0;
        let total: f64 = w.iter().sum();
        let mut cum: Vec<f64> = order
            .iter()
            .map(|&i| {
                acc += w[i] / total;
                acc
            })
            .collect();
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        cum.iter_mut().for_each(|c| *c = c.min(1.0));
        (order, cum)
    }
    let (oa, ca) = sorted_cumulative(pos_a, w_a);
    let (ob, cb) = sorted_cumulative(pos_b, w_b);
    let mut out = Vec::with_capacity(oa.len() + ob.len());
    merge_breakpoints(&ca, &cb, |i, j, m| out.push((oa[i], ob[j], m)));
    out
}

/// Exact `W_k` between two canonical 1-D measures.
///
/// For `k = ∞` the result is the largest gap `|F_μ^{-1} - F_ν^{-1}|` over
/// segments of mass above [`MERGE_TOLERANCE`]; slivers below that are
/// round-off in the cumulative sums.
pub fn wasserstein_1d(mu: &OneDMeasure, nu: &OneDMeasure, k: Order) -> Result<f64> {
    k.validate()?;
    Ok(k.root(wasserstein_1d_power(mu, nu, k)))
}

/// `W_k^k` (or `W_∞` for the infinite order) without the final root.
pub(crate) fn wasserstein_1d_power(mu: &OneDMeasure, nu: &OneDMeasure, k: Order) -> f64 {
    let (pa, pb) = (mu.positions(), nu.positions());
    match k {
        Order::Infinity => {
            let mut worst = 0.0f64;
            merge_breakpoints(mu.cumulative(), nu.cumulative(), |i, j, m| {
                if m > MERGE_TOLERANCE {
                    worst = worst.max((pa[i] - pb[j]).abs());
                }
            });
            worst
        }
        _ => {
            let mut acc = 0.0;
            merge_breakpoints(mu.cumulative(), nu.cumulative(), |i, j, m| {
                acc += m * k.cost(pa[i] - pb[j]);
            });
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pos: &[f64], w: &[f64]) -> OneDMeasure {
        OneDMeasure::new(pos.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let a = m(&[0.0], &[1.0]);
        assert_eq!(wasserstein_1d(&a, &a, Order::Finite(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn unit_shift_dirac() {
        let a = m(&[0.0], &[1.0]);
        let b = m(&[1.0], &[1.0]);
        assert_eq!(wasserstein_1d(&a, &b, Order::Finite(2.0)).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&a, &b, Order::Infinity).unwrap(), 1.0);
    }

    #[test]
    fn order_below_one_is_domain_error() {
        let a = m(&[0.0], &[1.0]);
        assert!(matches!(
            wasserstein_1d(&a, &a, Order::Finite(0.5)),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn infinity_ignores_roundoff_slivers() {
        // 0.1 + 0.2 != 0.3 in floating point; the sliver must not pair 0 with 10
        let a = m(&[0.0, 1.0, 2.0], &[0.1, 0.2, 0.7]);
        let b = m(&[0.0, 10.0], &[0.3, 0.7]);
        let w = wasserstein_1d(&a, &b, Order::Infinity).unwrap();
        assert_eq!(w, 8.0);
    }

    #[test]
    fn coupling_preserves_marginals() {
        let pa = [3.0, -1.0, 2.0];
        let wa = [0.2, 0.5, 0.3];
        let pb = [0.0, 5.0];
        let wb = [0.6, 0.4];
        let c = monotone_coupling(&pa, &wa, &pb, &wb);
        let mut ma = [0.0; 3];
        let mut mb = [0.0; 2];
        for (i, j, w) in c {
            ma[i] += w;
            mb[j] += w;
        }
        for (x, y) in ma.iter().zip(wa) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in mb.iter().zip(wb) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
