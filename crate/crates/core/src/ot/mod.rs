//! Discrete optimal transport: cost matrices, exact and regularized solvers,
//! and out-of-sample application of fitted plans.

mod cost;
mod emd;
mod regularized;
mod sinkhorn;
mod transform;

pub use cost::{build_cost_matrix, CostMatrix, MetricTag, NormalizationTag};
pub use emd::solve_emd;
pub use regularized::{
    laplacian_penalty, solve_emd_laplacian, solve_sinkhorn_class_reg, ClassRegVariant,
};
pub use sinkhorn::solve_sinkhorn;
pub use transform::{OosImage, OtTransform};

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("weights ({a}, {b}) do not match cost matrix ({rows} x {cols})")]
    ShapeMismatch {
        a: usize,
        b: usize,
        rows: usize,
        cols: usize,
    },
    #[error("solver did not terminate within {iterations} pivots")]
    NotConverged { iterations: usize },
}

/// A coupling between discrete source and target distributions.
///
/// Row sums match `source_weights` and column sums match `target_weights`
/// up to the solver tolerance; all entries are nonnegative.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// `n_source x n_target` mass assignments.
    pub plan: Array2<f64>,
    pub source_weights: Array1<f64>,
    pub target_weights: Array1<f64>,
    /// `<plan, C>` against the cost matrix the solver was given (any
    /// regularization terms excluded).
    pub transport_cost: f64,
    /// False when an iterative solver hit its iteration cap before reaching
    /// its marginal tolerance.
    pub converged: bool,
}

impl TransportPlan {
    /// Largest absolute row/column marginal error.
    pub fn max_marginal_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &w) in self.source_weights.iter().enumerate() {
            worst = worst.max((self.plan.row(i).sum() - w).abs());
        }
        for (j, &w) in self.target_weights.iter().enumerate() {
            worst = worst.max((self.plan.column(j).sum() - w).abs());
        }
        worst
    }
}

/// `sum_ij plan_ij * cost_ij`. When the cost matrix holds a metric raised to
/// the power `p`, the Wasserstein-p distance is this value to the `1/p`.
pub fn wasserstein_cost(plan: &TransportPlan, cost: &CostMatrix) -> f64 {
    assert_eq!(plan.plan.dim(), cost.entries.dim(), "shape mismatch");
    (&plan.plan * &cost.entries).sum()
}
