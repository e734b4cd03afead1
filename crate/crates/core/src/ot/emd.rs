//! Exact discrete optimal transport by the transportation network simplex.
//!
//! Deterministic pivoting: entering arc is the most negative reduced cost
//! with row-major tie-breaking, falling back to Bland's rule (first negative
//! arc) after a run of degenerate pivots so stalling cannot cycle.

use ndarray::{Array1, Array2};

use super::cost::CostMatrix;
use super::{OtError, TransportPlan};

/// Consecutive zero-gain pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 64;

pub fn solve_emd(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cost: &CostMatrix,
) -> Result<TransportPlan, OtError> {
    validate_weights(a, b, cost)?;
    let (keep_a, keep_b) = (nonzero_indices(a), nonzero_indices(b));
    let sub_a: Vec<f64> = keep_a.iter().map(|&i| a[i]).collect();
    let sub_b: Vec<f64> = keep_b.iter().map(|&j| b[j]).collect();
    let mut sub_c = Array2::<f64>::zeros((keep_a.len(), keep_b.len()));
    for (r, &i) in keep_a.iter().enumerate() {
        for (s, &j) in keep_b.iter().enumerate() {
            sub_c[[r, s]] = cost.entries[[i, j]];
        }
    }
    let sub_plan = simplex(&sub_a, &sub_b, &sub_c)?;
    let mut plan = Array2::<f64>::zeros((a.len(), b.len()));
    for (r, &i) in keep_a.iter().enumerate() {
        for (s, &j) in keep_b.iter().enumerate() {
            plan[[i, j]] = sub_plan[[r, s]];
        }
    }
    let transport_cost = (&plan * &cost.entries).sum();
    Ok(TransportPlan {
        plan,
        source_weights: a.clone(),
        target_weights: b.clone(),
        transport_cost,
        converged: true,
    })
}

pub(super) fn validate_weights(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cost: &CostMatrix,
) -> Result<(), OtError> {
    if a.len() != cost.n_source() || b.len() != cost.n_target() {
        return Err(OtError::ShapeMismatch {
            a: a.len(),
            b: b.len(),
            rows: cost.n_source(),
            cols: cost.n_target(),
        });
    }
    for w in a.iter().chain(b.iter()) {
        if !w.is_finite() || *w < 0.0 {
            return Err(OtError::InvalidWeights(format!(
                "weights must be finite and nonnegative, got {w}"
            )));
        }
    }
    let (sa, sb) = (a.sum(), b.sum());
    if (sa - 1.0).abs() > 1e-9 || (sb - 1.0).abs() > 1e-9 {
        return Err(OtError::InvalidWeights(format!(
            "weights must each sum to 1 (got {sa} and {sb})"
        )));
    }
    Ok(())
}

fn nonzero_indices(w: &Array1<f64>) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, _)| i)
        .collect()
}

struct Arc {
    i: usize,
    j: usize,
    flow: f64,
}

fn simplex(a: &[f64], b: &[f64], c: &Array2<f64>) -> Result<Array2<f64>, OtError> {
    let m = a.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Ok(Array2::zeros((m, n)));
    }
    let mut basis = northwest_corner(a, b);
    let mut in_basis = vec![false; m * n];
    for arc in &basis {
        in_basis[arc.i * n + arc.j] = true;
    }
    let cmax = c.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let tol = 1e-11 * cmax.max(1.0);
    let max_pivots = 20 * m * n + 1000;
    let mut degenerate_run = 0usize;
    let mut bland = false;

    for _pivot in 0..max_pivots {
        let (u, v) = potentials(&basis, m, n, c);
        let entering = find_entering(c, &in_basis, &u, &v, tol, bland);
        let (ei, ej) = match entering {
            Some(arc) => arc,
            None => {
                let mut plan = Array2::<f64>::zeros((m, n));
                for arc in &basis {
                    plan[[arc.i, arc.j]] = arc.flow;
                }
                return Ok(plan);
            }
        };
        let cycle = tree_path(&basis, m, n, ei, ej);
        // odd positions along the cycle (path arcs counted from the entering
        // arc) lose flow
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (pos, &arc_idx) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                let flow = basis[arc_idx].flow;
                if flow < theta {
                    theta = flow;
                    leave_pos = pos;
                }
            }
        }
        let leaving_idx = cycle[leave_pos];
        for (pos, &arc_idx) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                basis[arc_idx].flow -= theta;
            } else {
                basis[arc_idx].flow += theta;
            }
        }
        let leaving = &basis[leaving_idx];
        in_basis[leaving.i * n + leaving.j] = false;
        in_basis[ei * n + ej] = true;
        basis[leaving_idx] = Arc {
            i: ei,
            j: ej,
            flow: theta,
        };
        if theta <= tol {
            degenerate_run += 1;
            if degenerate_run > DEGENERATE_RUN {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }
    Err(OtError::NotConverged {
        iterations: max_pivots,
    })
}

/// Northwest-corner initial basis: exactly `m + n - 1` arcs, with zero-flow
/// arcs inserted on ties.
fn northwest_corner(a: &[f64], b: &[f64]) -> Vec<Arc> {
    let m = a.len();
    let n = b.len();
    let mut arcs = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_a = a[0];
    let mut rem_b = b[0];
    loop {
        let f = rem_a.min(rem_b).max(0.0);
        arcs.push(Arc { i, j, flow: f });
        rem_a -= f;
        rem_b -= f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if rem_a <= 0.0 && i < m - 1 {
            i += 1;
            rem_a = a[i];
        } else {
            j += 1;
            rem_b = b[j];
        }
    }
    debug_assert_eq!(arcs.len(), m + n - 1);
    arcs
}

/// Dual potentials from the basis tree: `u[i] + v[j] = c[i][j]` on basic arcs.
fn potentials(basis: &[Arc], m: usize, n: usize, c: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    // node k < m is source k; node m + j is target j
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (idx, arc) in basis.iter().enumerate() {
        adjacency[arc.i].push(idx);
        adjacency[m + arc.j].push(idx);
    }
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut seen = vec![false; m + n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(node) = stack.pop() {
        for &idx in &adjacency[node] {
            let arc = &basis[idx];
            let other = if node == arc.i { m + arc.j } else { arc.i };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            if other >= m {
                v[other - m] = c[[arc.i, arc.j]] - u[arc.i];
            } else {
                u[other] = c[[arc.i, arc.j]] - v[arc.j];
            }
            stack.push(other);
        }
    }
    (u, v)
}

fn find_entering(
    c: &Array2<f64>,
    in_basis: &[bool],
    u: &[f64],
    v: &[f64],
    tol: f64,
    bland: bool,
) -> Option<(usize, usize)> {
    let (m, n) = c.dim();
    let mut best: Option<(usize, usize)> = None;
    let mut best_reduced = -tol;
    for i in 0..m {
        for j in 0..n {
            if in_basis[i * n + j] {
                continue;
            }
            let reduced = c[[i, j]] - u[i] - v[j];
            if reduced < best_reduced {
                if bland {
                    return Some((i, j));
                }
                best_reduced = reduced;
                best = Some((i, j));
            }
        }
    }
    best
}

/// Arc indices along the unique tree path from target node `ej` back to
/// source node `ei`; combined with the entering arc these form the pivot
/// cycle. Returned in walk order starting at `ej`, so even positions are
/// the arcs that lose flow.
fn tree_path(basis: &[Arc], m: usize, n: usize, ei: usize, ej: usize) -> Vec<usize> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (idx, arc) in basis.iter().enumerate() {
        adjacency[arc.i].push(idx);
        adjacency[m + arc.j].push(idx);
    }
    let start = m + ej;
    let goal = ei;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n]; // (node, arc)
    let mut seen = vec![false; m + n];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &idx in &adjacency[node] {
            let arc = &basis[idx];
            let other = if node == arc.i { m + arc.j } else { arc.i };
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, idx));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let (prev, arc) = parent[node].expect("basis tree is connected");
        path.push(arc);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::cost::CostMatrix;
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> Array1<f64> {
        Array1::from_elem(n, 1.0 / n as f64)
    }

    /// Minimum cost over all permutation couplings; valid oracle for
    /// uniform square instances where the vertices are permutations.
    pub(crate) fn permutation_oracle(c: &Array2<f64>) -> f64 {
        let n = c.nrows();
        (0..n)
            .permutations(n)
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| c[[i, j]] / n as f64)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn single_point_plan() {
        let c = CostMatrix::from_entries(array![[3.5]]);
        let plan = solve_emd(&array![1.0], &array![1.0], &c).unwrap();
        assert_eq!(plan.plan, array![[1.0]]);
        assert_abs_diff_eq!(plan.transport_cost, 3.5, epsilon = 1e-15);
    }

    #[test]
    fn two_point_zero_cost_matching() {
        let c = CostMatrix::from_entries(array![[0.0, 1.0], [1.0, 0.0]]);
        let plan = solve_emd(&uniform(2), &uniform(2), &c).unwrap();
        assert_abs_diff_eq!(plan.transport_cost, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.plan[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.plan[[1, 1]], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn matches_permutation_oracle_on_seeded_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..25 {
            let n = rng.random_range(2..6);
            let c = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
            let cost = CostMatrix::from_entries(c.clone());
            let plan = solve_emd(&uniform(n), &uniform(n), &cost).unwrap();
            let oracle = permutation_oracle(&c);
            assert_abs_diff_eq!(plan.transport_cost, oracle, epsilon = 1e-10);
            assert!(plan.max_marginal_violation() < 1e-12);
        }
    }

    #[test]
    fn rectangular_marginals_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..10 {
            let m = rng.random_range(1..8);
            let n = rng.random_range(1..8);
            let mut a = Array1::from_shape_fn(m, |_| rng.random::<f64>() + 0.05);
            let mut b = Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.05);
            a /= a.sum();
            b /= b.sum();
            let c = CostMatrix::from_entries(Array2::from_shape_fn((m, n), |_| rng.random()));
            let plan = solve_emd(&a, &b, &c).unwrap();
            assert!(plan.max_marginal_violation() < 1e-9);
            // vertex solutions carry at most m + n - 1 nonzeros
            let nonzeros = plan.plan.iter().filter(|&&x| x > 0.0).count();
            assert!(nonzeros < m + n);
        }
    }

    #[test]
    fn zero_mass_rows_pruned_and_reinserted() {
        let a = array![0.5, 0.0, 0.5];
        let b = array![0.25, 0.75];
        let c = CostMatrix::from_entries(array![[1.0, 2.0], [5.0, 5.0], [2.0, 1.0]]);
        let plan = solve_emd(&a, &b, &c).unwrap();
        assert_eq!(plan.plan.row(1).sum(), 0.0);
        assert!(plan.max_marginal_violation() < 1e-12);
        assert_abs_diff_eq!(
            plan.transport_cost,
            0.25 * 1.0 + 0.25 * 2.0 + 0.5 * 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn invalid_weights_rejected() {
        let c = CostMatrix::from_entries(array![[0.0, 1.0], [1.0, 0.0]]);
        let err = solve_emd(&array![-0.5, 1.5], &uniform(2), &c).unwrap_err();
        assert!(matches!(err, OtError::InvalidWeights(_)));
        let err = solve_emd(&array![f64::NAN, 1.0], &uniform(2), &c).unwrap_err();
        assert!(matches!(err, OtError::InvalidWeights(_)));
        let err = solve_emd(&array![0.3, 0.3], &uniform(2), &c).unwrap_err();
        assert!(matches!(err, OtError::InvalidWeights(_)));
    }

    #[test]
    fn cost_scaling_preserves_plan_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let c_raw = Array2::from_shape_fn((5, 5), |_| rng.random::<f64>());
        let gamma = 3.75;
        let plan1 = solve_emd(&uniform(5), &uniform(5), &CostMatrix::from_entries(c_raw.clone()))
            .unwrap();
        let plan2 = solve_emd(
            &uniform(5),
            &uniform(5),
            &CostMatrix::from_entries(&c_raw * gamma),
        )
        .unwrap();
        assert_abs_diff_eq!(
            plan2.transport_cost,
            gamma * plan1.transport_cost,
            epsilon = 1e-10
        );
        for (x, y) in plan1.plan.iter().zip(plan2.plan.iter()) {
            assert_eq!(*x > 1e-12, *y > 1e-12, "support changed under scaling");
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>());
        let plan = solve_emd(&uniform(4), &uniform(4), &CostMatrix::from_entries(c.clone()))
            .unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut c_perm = Array2::<f64>::zeros((4, 4));
        for (i, &pi) in perm.iter().enumerate() {
            for j in 0..4 {
                c_perm[[i, j]] = c[[pi, j]];
            }
        }
        let plan_perm = solve_emd(
            &uniform(4),
            &uniform(4),
            &CostMatrix::from_entries(c_perm),
        )
        .unwrap();
        assert_abs_diff_eq!(
            plan_perm.transport_cost,
            plan.transport_cost,
            epsilon = 1e-12
        );
        for (i, &pi) in perm.iter().enumerate() {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    plan_perm.plan[[i, j]],
                    plan.plan[[pi, j]],
                    epsilon = 1e-9
                );
            }
        }
    }
}
