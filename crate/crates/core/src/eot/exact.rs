//! Exact transportation LP for small instances.
//!
//! Square problems with identical uniform weights go through a shortest
//! augmenting path assignment solver; everything else goes through a
//! transportation simplex on the bipartite spanning-tree basis. Both return
//! dual prices `(u, v)` with `u_j + v_k <= C_jk` as an optimality certificate.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cost::CostMatrix;
use super::plan::TransportPlan;

/// Largest number of cost cells the exact solver accepts.
pub const EXACT_OT_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct ExactSolution<T> {
    pub plan: TransportPlan<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
}

/// Optimal vertex coupling of the transportation LP. The plan has `eps = 0`
/// and no Schrödinger potentials.
pub fn exact_ot<T: Real>(a: &[T], b: &[T], cost: &CostMatrix<T>) -> Result<TransportPlan<T>> {
    exact_ot_with_duals(a, b, cost).map(|s| s.plan)
}

pub fn exact_ot_with_duals<T: Real>(a: &[T], b: &[T], cost: &CostMatrix<T>) -> Result<ExactSolution<T>> {
    let n = a.len();
    let m = b.len();
    if n * m > EXACT_OT_CAP {
        return Err(Error::Capacity {
            size: n * m,
            cap: EXACT_OT_CAP,
        });
    }
    if n == 0 || m == 0 {
        return Err(Error::Parameter("empty marginal".into()));
    }
    if cost.rows() != n || cost.cols() != m {
        return Err(Error::Schema("cost shape does not match weights".into()));
    }
    if !cost.is_finite() {
        return Err(Error::Numeric("non-finite cost entry".into()));
    }
    if a.iter().chain(b).any(|&w| w < T::zero() || !w.is_finite()) {
        return Err(Error::Parameter("weights must be nonnegative and finite".into()));
    }
    let uniform_square = n == m && a.iter().chain(b).all(|&w| w == a[0]);
    let (gamma, u, v) = if uniform_square {
        let (assign, u, v) = hungarian(cost);
        let mut gamma = vec![T::zero(); n * n];
        for (j, &k) in assign.iter().enumerate() {
            gamma[j * n + k] = a[j];
        }
        // Dual feasibility u_j + v_k <= C_jk does not depend on the common mass.
        (gamma, u, v)
    } else {
        transport_simplex(a, b, cost)?
    };
    let plan = TransportPlan::assemble(gamma, a.to_vec(), b.to_vec(), cost, T::zero(), None, true, 0);
    Ok(ExactSolution { plan, u, v })
}

/// Shortest augmenting path assignment (potential-based Hungarian method).
/// Returns the column assigned to each row and the dual prices.
fn hungarian<T: Real>(cost: &CostMatrix<T>) -> (Vec<usize>, Vec<T>, Vec<T>) {
    let n = cost.rows();
    // 1-based arrays with a virtual column 0.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

/// Transportation simplex. Basis cells form a spanning tree over the
/// `n + m` row/column nodes; degenerate (zero-flow) basic cells are kept.
fn transport_simplex<T: Real>(a: &[T], b: &[T], cost: &CostMatrix<T>) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = a.len();
    let m = b.len();
    let sa: T = a.iter().cloned().sum();
    let sb: T = b.iter().cloned().sum();
    if (sa - sb).abs() > T::lit(1e-9) * sa.max(T::one()) {
        return Err(Error::Parameter(format!("unbalanced marginals: {sa} vs {sb}")));
    }
    let scale = sa / sb;
    let mut supply: Vec<T> = a.to_vec();
    let mut demand: Vec<T> = b.iter().map(|&x| x * scale).collect();

    // Basic cells: (row, col, flow). Northwest corner start, exactly n + m - 1 cells.
    let mut cells: Vec<(usize, usize, T)> = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let x = supply[i].min(demand[j]);
        cells.push((i, j, x));
        supply[i] -= x;
        demand[j] -= x;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (i < n - 1 && supply[i] <= demand[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(cells.len(), n + m - 1);

    let cmax = cost.as_slice().iter().fold(T::zero(), |acc, c| acc.max(c.abs()));
    let price_tol = T::lit(1e-12) * (T::one() + cmax);
    let node_count = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for (e, &(r, c, _)) in cells.iter().enumerate() {
        adj[r].push(e);
        adj[n + c].push(e);
    }
    let mut u = vec![T::zero(); n];
    let mut v = vec![T::zero(); m];
    let mut degenerate_run = 0usize;
    let max_pivots = 50 * (n + m) * (n + m) + 1000;

    for _pivot in 0..max_pivots {
        compute_potentials(&cells, &adj, cost, n, &mut u, &mut v);

        let bland = degenerate_run > n + m;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -price_tol;
        'scan: for r in 0..n {
            let row = cost.row(r);
            for c in 0..m {
                let rc = row[c] - u[r] - v[c];
                if rc < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some((er, ec)) = entering else {
            let mut gamma = vec![T::zero(); n * m];
            for &(r, c, x) in &cells {
                gamma[r * m + c] = x.max(T::zero());
            }
            return Ok((gamma, u, v));
        };

        // Tree path from column node ec to row node er.
        let path = tree_path(&cells, &adj, n, n + ec, er);
        // Edges along the path alternate -, +, -, ... starting at the column end.
        let mut theta = T::infinity();
        let mut leave_pos = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let x = cells[e].2;
                let better = x < theta || (bland && x == theta && e < path[leave_pos]);
                if better {
                    theta = x;
                    leave_pos = pos;
                }
            }
        }
        let leave = path[leave_pos];
        if theta > T::zero() {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                cells[e].2 -= theta;
            } else {
                cells[e].2 += theta;
            }
        }
        // Swap the leaving cell for the entering one in place.
        let (lr, lc, _) = cells[leave];
        adj[lr].retain(|&x| x != leave);
        adj[n + lc].retain(|&x| x != leave);
        cells[leave] = (er, ec, theta);
        adj[er].push(leave);
        adj[n + ec].push(leave);
    }
    Err(Error::Numeric("transportation simplex did not terminate".into()))
}

fn compute_potentials<T: Real>(
    cells: &[(usize, usize, T)],
    adj: &[Vec<usize>],
    cost: &CostMatrix<T>,
    n: usize,
    u: &mut [T],
    v: &mut [T],
) {
    let total = adj.len();
    let mut seen = vec![false; total];
    let mut queue = VecDeque::new();
    u[0] = T::zero();
    seen[0] = true;
    queue.push_back(0usize);
    while let Some(node) = queue.pop_front() {
        for &e in &adj[node] {
            let (r, c, _) = cells[e];
            let other = if node < n { n + c } else { r };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            if other >= n {
                v[c] = cost.get(r, c) - u[r];
            } else {
                u[r] = cost.get(r, c) - v[c];
            }
            queue.push_back(other);
        }
    }
}

/// Edge indices along the unique tree path from `from` to `to`.
fn tree_path<T: Real>(cells: &[(usize, usize, T)], adj: &[Vec<usize>], n: usize, from: usize, to: usize) -> Vec<usize> {
    let total = adj.len();
    let mut parent_edge = vec![usize::MAX; total];
    let mut seen = vec![false; total];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &e in &adj[node] {
            let (r, c, _) = cells[e];
            let other = if node < n { n + c } else { r };
            if !seen[other] {
                seen[other] = true;
                parent_edge[other] = e;
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let e = parent_edge[node];
        path.push(e);
        let (r, c, _) = cells[e];
        node = if node < n { n + c } else { r };
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eot::uniform_weights;
    use crate::points::PointCloud;

    fn line(xs: &[f64]) -> PointCloud<f64> {
        PointCloud::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_on_identical_sets() {
        let x = line(&[0.0, 1.0]);
        let c = CostMatrix::half_sq_euclidean(&x, &x);
        let w = uniform_weights(2);
        let p = exact_ot(&w, &w, &c).unwrap();
        assert_eq!(p.gamma, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn monotone_matching_beats_crossing() {
        // Monotone: ½(4 + 4)/2 = 2. Crossed: ½(9 + 1)/2 = 2.5.
        let monotone = 0.5 * (4.0 + 4.0) / 2.0;
        let crossed = 0.5 * (9.0 + 1.0) / 2.0;
        assert!(monotone < crossed);
        let c = CostMatrix::half_sq_euclidean(&line(&[0.0, 1.0]), &line(&[2.0, 3.0]));
        let w = uniform_weights(2);
        let p = exact_ot(&w, &w, &c).unwrap();
        assert_eq!(p.transport_cost, monotone);
        assert_eq!(p.get(0, 0), 0.5);
        let (g, _, _) = transport_simplex(&w, &w, &c).unwrap();
        assert_eq!(g, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn capacity_is_enforced() {
        let c = CostMatrix::from_fn(1001, 1000, |_, _| 0.0f64);
        let a = uniform_weights(1001);
        let b = uniform_weights(1000);
        assert!(matches!(exact_ot(&a, &b, &c), Err(Error::Capacity { .. })));
    }

    #[test]
    fn hungarian_and_simplex_agree_with_permutation_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 5;
            let c = CostMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
            // Brute force over all permutations.
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| {
                let v: f64 = p.iter().enumerate().map(|(j, &k)| c.get(j, k)).sum::<f64>() / n as f64;
                best = best.min(v);
            });
            let w = uniform_weights(n);
            let h = exact_ot(&w, &w, &c).unwrap();
            assert!((h.transport_cost - best).abs() < 1e-12);
            let s = transport_simplex(&w, &w, &c).unwrap();
            let sv: f64 = s.0.iter().zip(c.as_slice()).map(|(g, c)| g * c).sum();
            assert!((sv - best).abs() < 1e-12);
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }
}
