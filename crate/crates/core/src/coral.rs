//! Closed-form correlation alignment: whiten features with the source
//! covariance, re-color with the target covariance, and re-center onto the
//! target mean. The linear map is optimal for the Frobenius covariance
//! matching objective.

use ndarray::{Array1, Array2};

use crate::linalg::{self, covariance, sym_eig, LinalgError, RANK_CUTOFF};
use crate::types::EmbeddingMatrix;

/// Fitted linear re-coloring map with the means it re-centers between.
#[derive(Debug, Clone)]
pub struct CoralTransform {
    /// `d x d` map applied on the right of row vectors.
    pub a: Array2<f64>,
    pub source_mean: Array1<f64>,
    pub target_mean: Array1<f64>,
    /// Rank used for the coloring factor: `min(rank C_S, rank C_T)`.
    pub rank_used: usize,
}

/// Fit the map `A = C_S^{-1/2} * C_T^{1/2}` from the ridged covariances,
/// with pseudo-inverse semantics on the source side and the coloring factor
/// truncated to `r = min(rank C_S, rank C_T)`.
pub fn coral_fit(
    xs: &EmbeddingMatrix,
    xt: &EmbeddingMatrix,
    ridge: f64,
) -> Result<CoralTransform, LinalgError> {
    assert_eq!(
        xs.ncols(),
        xt.ncols(),
        "source and target must share the embedding dimension"
    );
    assert!(xs.nrows() >= 1 && xt.nrows() >= 1);
    let cov_s = covariance(xs, ridge)?;
    let cov_t = covariance(xt, ridge)?;
    let (vals_s, vecs_s) = sym_eig(&cov_s.matrix)?;
    let (vals_t, vecs_t) = sym_eig(&cov_t.matrix)?;
    let rank = |vals: &[f64]| {
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        vals.iter().filter(|&&v| v > RANK_CUTOFF * top).count()
    };
    let r = rank(&vals_s).min(rank(&vals_t));
    let cut_s = RANK_CUTOFF * vals_s.first().copied().unwrap_or(0.0).max(0.0);
    let whiten_weights: Vec<f64> = vals_s
        .iter()
        .map(|&l| if l > cut_s { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    let whiten = linalg::scaled_outer(&vecs_s, &whiten_weights);
    let color_weights: Vec<f64> = vals_t
        .iter()
        .enumerate()
        .map(|(i, &l)| if i < r && l > 0.0 { l.sqrt() } else { 0.0 })
        .collect();
    let color = linalg::scaled_outer(&vecs_t, &color_weights);
    let a = whiten.dot(&color);
    let source_mean = xs.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let target_mean = xt.mean_axis(ndarray::Axis(0)).expect("nonempty");
    Ok(CoralTransform {
        a,
        source_mean,
        target_mean,
        rank_used: r,
    })
}

/// `(X - source_mean) A + target_mean`, row-wise.
pub fn coral_apply(transform: &CoralTransform, x: &EmbeddingMatrix) -> EmbeddingMatrix {
    assert_eq!(x.ncols(), transform.a.nrows(), "dimension mismatch");
    let centered = x - &transform
        .source_mean
        .view()
        .insert_axis(ndarray::Axis(0));
    let mut out = centered.dot(&transform.a);
    out += &transform.target_mean.view().insert_axis(ndarray::Axis(0));
    out
}

/// Single-row convenience wrapper around [`coral_apply`].
pub fn coral_apply_row(transform: &CoralTransform, x: ndarray::ArrayView1<f64>) -> Array1<f64> {
    let mut row = Array2::zeros((1, x.len()));
    row.row_mut(0).assign(&x);
    coral_apply(transform, &row).row(0).to_owned()
}
