//! Structured regularizers on top of the exact and entropic solvers:
//! Laplacian displacement smoothing solved by conditional gradient, and
//! class-group penalties solved by majorization-minimization (LpL1) or
//! generalized conditional gradient (L1L2).

use ndarray::{Array1, Array2};

use super::cost::CostMatrix;
use super::emd::solve_emd;
use super::sinkhorn::solve_sinkhorn;
use super::{OtError, TransportPlan};
use crate::types::EmbeddingMatrix;

/// Group-sparsity flavor for class-regularized Sinkhorn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassRegVariant {
    /// `sum_j sum_cls ||P[cls, j]||_{1/2}^{1/2}`, majorized each outer loop
    /// by a per-group gradient added to the cost.
    LpL1,
    /// `sum_j sum_cls ||P[cls, j]||_2`, handled by generalized conditional
    /// gradient with Sinkhorn inner solves.
    L1L2,
}

const LPL1_POWER: f64 = 0.5;
const LPL1_SMOOTHING: f64 = 1e-3;

/// EMD with a Laplacian displacement penalty, minimized by conditional
/// gradient over the transportation polytope.
///
/// The objective is `<P, C> + reg_lap * tr(B(P)^T L B(P))` where `B(P)` maps
/// each source row to its barycentric image and `L` is the Laplacian of a
/// symmetric k-nearest-neighbor similarity graph over the source rows. Every
/// iterate is a convex combination of transport vertices, so marginals hold
/// exactly at every step.
pub fn solve_emd_laplacian(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cost: &CostMatrix,
    xs: &EmbeddingMatrix,
    xt: &EmbeddingMatrix,
    reg_lap: f64,
    max_cg_iter: usize,
) -> Result<TransportPlan, OtError> {
    assert!(reg_lap >= 0.0, "reg_lap must be nonnegative");
    let base = solve_emd(a, b, cost)?;
    if reg_lap == 0.0 || xs.nrows() <= 1 {
        return Ok(base);
    }
    let laplacian = knn_laplacian(xs);
    let inv_a: Array1<f64> = a.mapv(|w| if w > 0.0 { 1.0 / w } else { 0.0 });

    let images = |p: &Array2<f64>| -> Array2<f64> {
        let mut img = p.dot(xt);
        for (mut row, &inv) in img.rows_mut().into_iter().zip(inv_a.iter()) {
            row.mapv_inplace(|v| v * inv);
        }
        img
    };
    let quad = |p: &Array2<f64>, q: &Array2<f64>| -> f64 {
        // tr(B(p)^T L B(q))
        let bp = images(p);
        let bq = laplacian.dot(&images(q));
        (&bp * &bq).sum()
    };

    let mut plan = base.plan.clone();
    for _ in 0..max_cg_iter {
        // gradient of the penalty: 2 diag(1/a) L B(P) Xt^T
        let grad_pen = {
            let lb = laplacian.dot(&images(&plan));
            let mut g = lb.dot(&xt.t());
            for (mut row, &inv) in g.rows_mut().into_iter().zip(inv_a.iter()) {
                row.mapv_inplace(|v| 2.0 * reg_lap * v * inv);
            }
            g
        };
        let linear_cost = CostMatrix::from_entries(&cost.entries + &grad_pen);
        let vertex = solve_emd(a, b, &linear_cost)?;
        let delta = &vertex.plan - &plan;
        let slope = (&delta * &cost.entries).sum() + 2.0 * reg_lap * quad(&delta, &plan);
        if slope >= -1e-12 {
            break;
        }
        let curvature = reg_lap * quad(&delta, &delta);
        let gamma = if curvature > 1e-300 {
            (-slope / (2.0 * curvature)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        if gamma <= 0.0 {
            break;
        }
        plan = &plan + &(&delta * gamma);
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

/// Laplacian displacement penalty value for a given plan; exposed so callers
/// and tests can compare objectives.
pub fn laplacian_penalty(
    plan: &Array2<f64>,
    a: &Array1<f64>,
    xs: &EmbeddingMatrix,
    xt: &EmbeddingMatrix,
) -> f64 {
    let laplacian = knn_laplacian(xs);
    let mut img = plan.dot(xt);
    for (mut row, &w) in img.rows_mut().into_iter().zip(a.iter()) {
        let inv = if w > 0.0 { 1.0 / w } else { 0.0 };
        row.mapv_inplace(|v| v * inv);
    }
    (&img * &laplacian.dot(&img)).sum()
}

/// Symmetric kNN graph Laplacian (k = min(5, n-1)) with Gaussian weights and
/// the median-squared-distance bandwidth.
fn knn_laplacian(xs: &EmbeddingMatrix) -> Array2<f64> {
    let n = xs.nrows();
    let k = 5.min(n.saturating_sub(1));
    let mut sq = Array2::<f64>::zeros((n, n));
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = xs
                .row(i)
                .iter()
                .zip(xs.row(j).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            sq[[i, j]] = d;
            sq[[j, i]] = d;
            all.push(d);
        }
    }
    let bandwidth = super::cost::median(all).max(1e-12);
    let mut weights = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&p, &q| sq[[i, p]].partial_cmp(&sq[[i, q]]).expect("finite"));
        for &j in order.iter().take(k) {
            let w = (-sq[[i, j]] / bandwidth).exp();
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    let mut laplacian = -weights;
    for i in 0..n {
        let degree = -laplacian.row(i).sum();
        laplacian[[i, i]] = degree;
    }
    laplacian
}

/// Sinkhorn transport with a per-class group-sparsity penalty of weight
/// `eta` on the source rows, driving each target column to draw mass from a
/// single source class.
#[allow(clippy::too_many_arguments)]
pub fn solve_sinkhorn_class_reg(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cost: &CostMatrix,
    source_labels: &[usize],
    variant: ClassRegVariant,
    epsilon: f64,
    eta: f64,
    outer_iter: usize,
    inner_max_iter: usize,
    inner_tol: f64,
) -> Result<TransportPlan, OtError> {
    assert_eq!(
        source_labels.len(),
        cost.n_source(),
        "one label per source row"
    );
    assert!(eta >= 0.0, "eta must be nonnegative");
    let groups = group_indices(source_labels);
    match variant {
        ClassRegVariant::LpL1 => {
            let mut extra = Array2::<f64>::zeros(cost.entries.dim());
            let mut plan = None;
            for _ in 0..outer_iter.max(1) {
                let reg_cost = CostMatrix::from_entries(&cost.entries + &extra);
                let solved = solve_sinkhorn(a, b, &reg_cost, epsilon, inner_max_iter, inner_tol)?;
                extra.fill(eta);
                for idx in groups.values() {
                    for j in 0..cost.n_target() {
                        let mass: f64 = idx.iter().map(|&i| solved.plan[[i, j]]).sum();
                        let grad =
                            eta * LPL1_POWER * (mass + LPL1_SMOOTHING).powf(LPL1_POWER - 1.0);
                        for &i in idx {
                            extra[[i, j]] = grad;
                        }
                    }
                }
                plan = Some(solved);
            }
            let mut solved = plan.expect("outer_iter >= 1");
            solved.transport_cost = (&solved.plan * &cost.entries).sum();
            Ok(solved)
        }
        ClassRegVariant::L1L2 => {
            let group_norms = |p: &Array2<f64>| -> Array2<f64> {
                // per (group, column) L2 norm, broadcast back to member rows
                let mut norms = Array2::<f64>::zeros(p.dim());
                for idx in groups.values() {
                    for j in 0..p.ncols() {
                        let norm: f64 = idx
                            .iter()
                            .map(|&i| p[[i, j]] * p[[i, j]])
                            .sum::<f64>()
                            .sqrt();
                        for &i in idx {
                            norms[[i, j]] = norm;
                        }
                    }
                }
                norms
            };
            let objective = |p: &Array2<f64>| -> f64 {
                let linear = (p * &cost.entries).sum();
                let entropy: f64 = p
                    .iter()
                    .map(|&x| if x > 0.0 { x * (x.ln() - 1.0) } else { 0.0 })
                    .sum();
                let mut group = 0.0;
                for idx in groups.values() {
                    for j in 0..p.ncols() {
                        group += idx
                            .iter()
                            .map(|&i| p[[i, j]] * p[[i, j]])
                            .sum::<f64>()
                            .sqrt();
                    }
                }
                linear + epsilon * entropy + eta * group
            };

            let mut current = solve_sinkhorn(a, b, cost, epsilon, inner_max_iter, inner_tol)?;
            let mut value = objective(&current.plan);
            for _ in 0..outer_iter {
                let norms = group_norms(&current.plan);
                let mut grad = Array2::<f64>::zeros(current.plan.dim());
                for ((g, &p), &norm) in grad.iter_mut().zip(current.plan.iter()).zip(norms.iter())
                {
                    if norm > 1e-300 {
                        *g = eta * p / norm;
                    }
                }
                let lin_cost = CostMatrix::from_entries(&cost.entries + &grad);
                let vertex = solve_sinkhorn(a, b, &lin_cost, epsilon, inner_max_iter, inner_tol)?;
                let delta = &vertex.plan - &current.plan;
                // golden-section search on the convex 1-D restriction
                let eval = |gamma: f64| objective(&(&current.plan + &(&delta * gamma)));
                let gamma = golden_section(eval, 0.0, 1.0, 48);
                let candidate = &current.plan + &(&delta * gamma);
                let cand_value = objective(&candidate);
                if cand_value >= value - 1e-12 * value.abs().max(1.0) {
                    break;
                }
                value = cand_value;
                current.plan = candidate;
                current.converged = current.converged && vertex.converged;
            }
            current.transport_cost = (&current.plan * &cost.entries).sum();
            Ok(current)
        }
    }
}

fn group_indices(labels: &[usize]) -> std::collections::BTreeMap<usize, Vec<usize>> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        groups.entry(label).or_default().push(i);
    }
    groups
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, steps: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..steps {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
