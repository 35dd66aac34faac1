//! Brute-force optimal transport used to check the fast 1-D path.
//!
//! Nothing here knows about sorting or quantiles. Uniform measures with equal
//! atom counts are matched by enumerating every permutation. General weights
//! go through a dense transportation simplex (northwest-corner start, MODI
//! potentials, Bland's rule). `W_∞` is the bottleneck value: the smallest
//! pairwise distance threshold under which a feasible coupling exists.

use crate::error::{validation, Error, Result};

use super::measure::{DiscreteMeasure, Order};

/// Largest atom count accepted by [`wasserstein_oracle`].
pub const ORACLE_MAX_ATOMS: usize = 10;

/// Largest atom count solved by permutation enumeration.
pub const PERMUTATION_MAX_ATOMS: usize = 8;

const SIMPLEX_MAX_PIVOTS: usize = 100_000;
const REDUCED_COST_TOLERANCE: f64 = 1e-12;
const FEASIBILITY_TOLERANCE: f64 = 1e-12;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact `W_k` between two small discrete measures in `R^d`.
pub fn wasserstein_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, k: Order) -> Result<f64> {
    k.validate()?;
    if mu.dim() != nu.dim() {
        return Err(validation(format!(
            "dimension mismatch {} vs {}",
            mu.dim(),
            nu.dim()
        )));
    }
    for (what, m) in [("first measure", mu), ("second measure", nu)] {
        if m.len() > ORACLE_MAX_ATOMS {
            return Err(Error::Size {
                what,
                got: m.len(),
                cap: ORACLE_MAX_ATOMS,
            });
        }
    }
    let dist: Vec<Vec<f64>> = mu
        .atoms()
        .iter()
        .map(|x| nu.atoms().iter().map(|y| euclidean(x, y)).collect())
        .collect();

    if mu.len() == nu.len() && mu.len() <= PERMUTATION_MAX_ATOMS && mu.is_uniform() && nu.is_uniform() {
        return Ok(permutation_oracle(&dist, k));
    }

    match k {
        Order::Infinity => bottleneck(&dist, mu.weights(), nu.weights()),
        _ => {
            let cost: Vec<Vec<f64>> = dist
                .iter()
                .map(|row| row.iter().map(|&d| k.cost(d)).collect())
                .collect();
            let value = transport_cost(&cost, mu.weights(), nu.weights())?;
            Ok(k.root(value))
        }
    }
}

/// Minimum over all `n!` matchings (Heap's algorithm).
fn permutation_oracle(dist: &[Vec<f64>], k: Order) -> f64 {
    let n = dist.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let evaluate = |p: &[usize]| -> f64 {
        match k {
            Order::Infinity => p
                .iter()
                .enumerate()
                .map(|(i, &j)| dist[i][j])
                .fold(0.0, f64::max),
            _ => p.iter().enumerate().map(|(i, &j)| k.cost(dist[i][j])).sum::<f64>() / n as f64,
        }
    };
    let mut best = evaluate(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(evaluate(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    k.root(best)
}

/// Smallest threshold `t` among pairwise distances such that mass can be
/// moved using only pairs with distance `<= t`.
fn bottleneck(dist: &[Vec<f64>], a: &[f64], b: &[f64]) -> Result<f64> {
    let mut thresholds: Vec<f64> = dist.iter().flatten().copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let feasible = |t: f64| -> Result<bool> {
        let cost: Vec<Vec<f64>> = dist
            .iter()
            .map(|row| row.iter().map(|&d| if d <= t { 0.0 } else { 1.0 }).collect())
            .collect();
        Ok(transport_cost(&cost, a, b)? <= FEASIBILITY_TOLERANCE)
    };
    let (mut lo, mut hi) = (0usize, thresholds.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(thresholds[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(thresholds[lo])
}

/// Minimum of `Σ c_ij π_ij` over couplings of `a` and `b`.
pub fn transport_cost(cost: &[Vec<f64>], a: &[f64], b: &[f64]) -> Result<f64> {
    let plan = transport_plan(cost, a, b)?;
    Ok(plan
        .iter()
        .map(|&(i, j, x)| x * cost[i][j])
        .sum())
}

/// Optimal basic plan of the balanced transportation problem as
/// `(row, column, mass)` triples (zero-valued basic cells included).
pub fn transport_plan(cost: &[Vec<f64>], a: &[f64], b: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 || cost.len() != n || cost.iter().any(|r| r.len() != m) {
        return Err(validation("transport problem shape mismatch"));
    }
    let total_a: f64 = a.iter().sum();
    let total_b: f64 = b.iter().sum();
    let supply = a.to_vec();
    let demand: Vec<f64> = b.iter().map(|x| x * total_a / total_b).collect();

    // northwest-corner start: exactly n + m - 1 basic cells
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);
    let mut x = vec![vec![0.0; m]; n];
    let (mut ra, mut rb) = (supply.clone(), demand.clone());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = ra[i].min(rb[j]);
        x[i][j] = q;
        basis.push((i, j));
        ra[i] -= q;
        rb[j] -= q;
        if basis.len() == n + m - 1 {
            break;
        }
        if (ra[i] <= rb[j] || j == m - 1) && i < n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut in_basis = vec![vec![false; m]; n];
    for &(r, c) in &basis {
        in_basis[r][c] = true;
    }

    for _ in 0..SIMPLEX_MAX_PIVOTS {
        let (u, v) = potentials(&basis, cost, n, m);
        let entering = (0..n)
            .flat_map(|r| (0..m).map(move |c| (r, c)))
            .find(|&(r, c)| !in_basis[r][c] && cost[r][c] - u[r] - v[c] < -REDUCED_COST_TOLERANCE);
        let Some((er, ec)) = entering else {
            return Ok(basis.iter().map(|&(r, c)| (r, c, x[r][c])).collect());
        };

        let path = tree_path(&basis, n, m, ec, er);
        // path alternates -, +, -, ... starting from the cell in column `ec`
        let minus: Vec<(usize, usize)> = path.iter().step_by(2).copied().collect();
        let plus: Vec<(usize, usize)> = path.iter().skip(1).step_by(2).copied().collect();
        let theta = minus
            .iter()
            .map(|&(r, c)| x[r][c])
            .fold(f64::INFINITY, f64::min);
        let leaving = *minus
            .iter()
            .filter(|&&(r, c)| x[r][c] == theta)
            .min()
            .expect("cycle has a minus cell");

        x[er][ec] += theta;
        for &(r, c) in &plus {
            x[r][c] += theta;
        }
        for &(r, c) in &minus {
            x[r][c] -= theta;
        }
        x[leaving.0][leaving.1] = 0.0;
        in_basis[leaving.0][leaving.1] = false;
        in_basis[er][ec] = true;
        let pos = basis.iter().position(|&c| c == leaving).unwrap();
        basis[pos] = (er, ec);
    }
    Err(Error::Domain("transportation simplex did not terminate".into()))
}

/// Dual potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
fn potentials(basis: &[(usize, usize)], cost: &[Vec<f64>], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; m];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for &(r, c) in basis {
            if !u[r].is_nan() && v[c].is_nan() {
                v[c] = cost[r][c] - u[r];
                changed = true;
            } else if u[r].is_nan() && !v[c].is_nan() {
                u[r] = cost[r][c] - v[c];
                changed = true;
            }
        }
    }
    (u, v)
}

/// Basic cells on the tree path from column `col` to row `row`, in order.
fn tree_path(basis: &[(usize, usize)], n: usize, m: usize, col: usize, row: usize) -> Vec<(usize, usize)> {
    // nodes 0..n are rows, n..n+m are columns
    let mut adj: Vec<Vec<(usize, (usize, usize))>> = vec![Vec::new(); n + m];
    for &(r, c) in basis {
        adj[r].push((n + c, (r, c)));
        adj[n + c].push((r, (r, c)));
    }
    let start = n + col;
    let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; n + m];
    let mut seen = vec![false; n + m];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &(next, cell) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, cell));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while node != start {
        let (prev, cell) = parent[node].expect("basis is a spanning tree");
        path.push(cell);
        node = prev;
    }
    path.reverse();
    path
}
