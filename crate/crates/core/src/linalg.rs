//! Dense linear algebra for covariance alignment and SPD-matrix distances.
//!
//! Everything here targets symmetric matrices of embedding dimensionality
//! (tens to a few thousand): covariance with explicit ridge, cyclic Jacobi
//! eigendecomposition, one-sided Jacobi SVD, Cholesky solves, and fractional
//! SPD powers with pseudo-inverse semantics. Contracts are stated as residual
//! tolerances, not algorithm choices.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use thiserror::Error;

use crate::types::EmbeddingMatrix;

/// Relative eigenvalue cutoff below which a direction counts as null space
/// when forming pseudo-inverses and ranks.
pub const RANK_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    /// Cholesky hit a non-positive pivot; the covariance needs a larger ridge.
    #[error("covariance is numerically singular (pivot {pivot:.3e} at index {index}); raise the ridge")]
    DegenerateCovariance { index: usize, pivot: f64 },
    #[error("iterative decomposition failed to converge after {sweeps} sweeps")]
    NumericalFailure { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Ridge-regularized covariance matrix with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SpdEstimate {
    pub dim: usize,
    pub matrix: Array2<f64>,
    pub ridge: f64,
    /// Lower-triangular Cholesky factor of `matrix`.
    pub chol: Array2<f64>,
    /// log det(matrix) = 2 * sum(log diag(chol)).
    pub logdet: f64,
}

/// Default ridge used by covariance consumers: `1e-6 * trace / dim` of the
/// unridged covariance. Can be zero when every column is constant; callers
/// that must survive that case pass an explicit floor.
pub fn default_ridge(x: &EmbeddingMatrix) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return 0.0;
    }
    let denom = (n.saturating_sub(1)).max(1) as f64;
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let mut trace = 0.0;
    for j in 0..x.ncols() {
        let mut s = 0.0;
        for i in 0..n {
            let d = x[[i, j]] - mean[j];
            s += d * d;
        }
        trace += s / denom;
    }
    1e-6 * trace / x.ncols() as f64
}

/// Sample covariance `(X - mean)^T (X - mean) / max(n-1, 1) + ridge * I`,
/// factored on construction. Fails with [`LinalgError::DegenerateCovariance`]
/// when the ridged matrix is not positive definite.
pub fn covariance(x: &EmbeddingMatrix, ridge: f64) -> Result<SpdEstimate, LinalgError> {
    let n = x.nrows();
    let d = x.ncols();
    assert!(n >= 1, "covariance needs at least one row");
    assert!(ridge >= 0.0, "ridge must be nonnegative");
    let denom = (n.saturating_sub(1)).max(1) as f64;
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let mut cov = Array2::<f64>::zeros((d, d));
    for i in 0..n {
        let row = x.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[[a, b]] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[[a, b]] / denom;
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
        cov[[a, a]] += ridge;
    }
    SpdEstimate::from_matrix(cov, ridge)
}

impl SpdEstimate {
    /// Factor an already-formed symmetric matrix (ridge assumed included).
    pub fn from_matrix(matrix: Array2<f64>, ridge: f64) -> Result<Self, LinalgError> {
        let dim = matrix.nrows();
        assert_eq!(dim, matrix.ncols(), "SPD matrix must be square");
        let chol = cholesky(matrix.view())?;
        let logdet = 2.0 * (0..dim).map(|i| chol[[i, i]].ln()).sum::<f64>();
        Ok(Self {
            dim,
            matrix,
            ridge,
            chol,
            logdet,
        })
    }

    /// Solve `matrix * X = B` through the stored Cholesky factor.
    pub fn solve(&self, b: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
        if b.nrows() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                got: b.nrows(),
            });
        }
        let mut x = b.clone();
        let l = &self.chol;
        let n = self.dim;
        let k = b.ncols();
        // forward: L y = b
        for c in 0..k {
            for i in 0..n {
                let mut s = x[[i, c]];
                for j in 0..i {
                    s -= l[[i, j]] * x[[j, c]];
                }
                x[[i, c]] = s / l[[i, i]];
            }
            // back: L^T x = y
            for i in (0..n).rev() {
                let mut s = x[[i, c]];
                for j in i + 1..n {
                    s -= l[[j, i]] * x[[j, c]];
                }
                x[[i, c]] = s / l[[i, i]];
            }
        }
        Ok(x)
    }

    /// `trace(matrix^-1 * B)` without forming the inverse.
    pub fn inv_trace_product(&self, b: &Array2<f64>) -> Result<f64, LinalgError> {
        let x = self.solve(b)?;
        Ok((0..self.dim).map(|i| x[[i, i]]).sum())
    }
}

/// Solve `S.matrix * X = B` (kept as a free function mirroring the module's
/// operation set).
pub fn spd_solve(s: &SpdEstimate, b: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    s.solve(b)
}

fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>, LinalgError> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(LinalgError::DegenerateCovariance { index: i, pivot: s });
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

const JACOBI_SWEEP_CAP: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending with matching orthonormal
/// eigenvector columns; `A v_i = lambda_i v_i` holds to around machine
/// precision times the matrix norm.
pub fn sym_eig(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eig needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return Ok(((0..n).map(|i| m[[i, i]]).collect(), v));
    }
    let norm = frobenius(&m.view()).max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;
    let mut converged = false;
    for _sweep in 0..JACOBI_SWEEP_CAP {
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // smaller-root tangent keeps rotations well conditioned
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // final check after the last sweep
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() > tol {
            return Err(LinalgError::NumericalFailure {
                sweeps: JACOBI_SWEEP_CAP,
            });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = v[[k, i]];
        }
    }
    Ok((values, vectors))
}

/// `(U, singular_values, V)` of a thin SVD.
pub type SvdFactors = (Array2<f64>, Vec<f64>, Array2<f64>);

/// Thin SVD `A = U diag(s) V^T` by one-sided (Hestenes) Jacobi.
///
/// `U` is `m x k`, `V` is `n x k` with `k = min(m, n)`; singular values are
/// nonnegative and sorted descending. Columns of `U` belonging to zero
/// singular values are completed to an orthonormal set.
pub fn svd(a: &Array2<f64>) -> Result<SvdFactors, LinalgError> {
    let (m, n) = a.dim();
    if m < n {
        let (u, s, v) = svd(&a.t().to_owned())?;
        return Ok((v, s, u));
    }
    let mut b = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let norm = frobenius(&b.view());
    if norm == 0.0 {
        let u = orthonormal_completion(Array2::zeros((m, n)), 0, m, n);
        return Ok((u, vec![0.0; n], v));
    }
    let tol = 1e-15;
    let mut converged = false;
    for _sweep in 0..JACOBI_SWEEP_CAP {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for k in 0..m {
                    app += b[[k, p]] * b[[k, p]];
                    aqq += b[[k, q]] * b[[k, q]];
                    apq += b[[k, p]] * b[[k, q]];
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || app == 0.0 || aqq == 0.0 {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let bkp = b[[k, p]];
                    let bkq = b[[k, q]];
                    b[[k, p]] = c * bkp - s * bkq;
                    b[[k, q]] = s * bkp + c * bkq;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NumericalFailure {
            sweeps: JACOBI_SWEEP_CAP,
        });
    }
    // column norms are the singular values
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let mut s = 0.0;
            for k in 0..m {
                s += b[[k, j]] * b[[k, j]];
            }
            (s.sqrt(), j)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite singular values"));
    let mut u = Array2::<f64>::zeros((m, n));
    let mut vout = Array2::<f64>::zeros((n, n));
    let mut values = Vec::with_capacity(n);
    let zero_cut = RANK_CUTOFF * pairs[0].0.max(f64::MIN_POSITIVE);
    let mut nonzero = 0usize;
    for (col, &(sv, j)) in pairs.iter().enumerate() {
        values.push(sv);
        for k in 0..n {
            vout[[k, col]] = v[[k, j]];
        }
        if sv > zero_cut {
            for k in 0..m {
                u[[k, col]] = b[[k, j]] / sv;
            }
            nonzero = col + 1;
        }
    }
    let u = orthonormal_completion(u, nonzero, m, n);
    Ok((u, values, vout))
}

/// Fill columns `filled..n` of `u` with unit vectors orthogonal to the
/// existing columns (modified Gram-Schmidt against standard basis seeds).
fn orthonormal_completion(mut u: Array2<f64>, filled: usize, m: usize, n: usize) -> Array2<f64> {
    let mut col = filled;
    let mut seed = 0usize;
    while col < n && seed < m {
        let mut cand = Array1::<f64>::zeros(m);
        cand[seed] = 1.0;
        for j in 0..col {
            let dot: f64 = (0..m).map(|k| u[[k, j]] * cand[k]).sum();
            for k in 0..m {
                cand[k] -= dot * u[[k, j]];
            }
        }
        let norm = cand.dot(&cand).sqrt();
        if norm > 1e-8 {
            for k in 0..m {
                u[[k, col]] = cand[k] / norm;
            }
            col += 1;
        }
        seed += 1;
    }
    u
}

/// `S^p` for `p` in {+1/2, -1/2} through the eigendecomposition.
///
/// For `p = -1/2`, eigenvalues at or below `RANK_CUTOFF * lambda_max` are
/// treated as exact zeros (Moore-Penrose pseudo-inverse semantics).
pub fn fractional_spd_power(s: &SpdEstimate, p: f64) -> Result<Array2<f64>, LinalgError> {
    assert!(
        p == 0.5 || p == -0.5,
        "fractional_spd_power supports p = +1/2 or -1/2"
    );
    let (values, vectors) = sym_eig(&s.matrix)?;
    let lam_max = values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = RANK_CUTOFF * lam_max;
    let powered: Vec<f64> = values
        .iter()
        .map(|&l| {
            if l <= cut {
                0.0
            } else if p > 0.0 {
                l.sqrt()
            } else {
                1.0 / l.sqrt()
            }
        })
        .collect();
    Ok(scaled_outer(&vectors, &powered))
}

/// `V diag(w) V^T`.
pub(crate) fn scaled_outer(vectors: &Array2<f64>, weights: &[f64]) -> Array2<f64> {
    let n = vectors.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for r in 0..n {
            let vr = vectors[[r, j]] * w;
            if vr == 0.0 {
                continue;
            }
            for c in 0..n {
                out[[r, c]] += vr * vectors[[c, j]];
            }
        }
    }
    out
}

pub(crate) fn frobenius(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
