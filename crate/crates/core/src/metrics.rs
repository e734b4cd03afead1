//! Embedding-set similarity and distance metrics for transformation
//! selection: correlation scores, linear and Gaussian-kernel MMD,
//! higher-order moment matching, and covariance (CORAL-family) distances.

use ndarray::{Array1, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{covariance, LinalgError, SpdEstimate};
use crate::types::EmbeddingMatrix;

/// Whether a metric counts higher values as better (similarity) or lower
/// values as better (distance); selection argmaxes or argmins accordingly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Similarity,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoralVariant {
    /// Frobenius covariance gap with the `1/(4 d^2)` normalization.
    Standard,
    /// Symmetrized KL trace form `tr(C1^-1 C2)/2 + tr(C2^-1 C1)/2 - d`.
    Jeff,
    /// Symmetrized log-det form `logdet((C1+C2)/2) - logdet(C1 C2)/2`.
    Stein,
}

/// A selection metric with its parameters; orientation metadata lets the
/// selector treat all of them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    CrossCorrelation,
    PearsonCorrelation,
    LinearMmd,
    KernelMmd { bandwidth: f64 },
    HighOrderMoments { order: u32, subsample_cap: usize, seed: u64 },
    Coral { variant: CoralVariant, ridge: f64 },
}

impl MetricKind {
    pub fn orientation(&self) -> Orientation {
        match self {
            MetricKind::CrossCorrelation | MetricKind::PearsonCorrelation => {
                Orientation::Similarity
            }
            _ => Orientation::Distance,
        }
    }

    /// Score a candidate set against a reference set. Singleton sets are the
    /// common case at selection time and degrade gracefully everywhere.
    pub fn score_sets(
        &self,
        x: &EmbeddingMatrix,
        y: &EmbeddingMatrix,
    ) -> Result<f64, LinalgError> {
        match *self {
            MetricKind::CrossCorrelation => Ok(mean_over_rows(x, |row| {
                correlation(row, y, CorrelationKind::Cross)
            })),
            MetricKind::PearsonCorrelation => Ok(mean_over_rows(x, |row| {
                correlation(row, y, CorrelationKind::Pearson)
            })),
            MetricKind::LinearMmd => Ok(mmd_linear(x, y)),
            MetricKind::KernelMmd { bandwidth } => Ok(kmmd(x, y, bandwidth)),
            MetricKind::HighOrderMoments {
                order,
                subsample_cap,
                seed,
            } => Ok(homm(x, y, order, subsample_cap, seed)),
            MetricKind::Coral { variant, ridge } => coral_distance(x, y, variant, ridge),
        }
    }
}

fn mean_over_rows(x: &EmbeddingMatrix, f: impl Fn(ArrayView1<f64>) -> f64) -> f64 {
    let n = x.nrows();
    assert!(n > 0, "empty candidate set");
    x.rows().into_iter().map(f).sum::<f64>() / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    /// Mean raw dot product against the reference rows.
    Cross,
    /// Mean Pearson coefficient against the reference rows; zero-variance
    /// pairs contribute 0.
    Pearson,
}

/// Similarity of one embedding against a reference set.
pub fn correlation(x: ArrayView1<f64>, y: &EmbeddingMatrix, kind: CorrelationKind) -> f64 {
    assert_eq!(x.len(), y.ncols(), "dimension mismatch");
    let n = y.nrows();
    assert!(n > 0, "empty reference set");
    let total: f64 = y
        .rows()
        .into_iter()
        .map(|row| match kind {
            CorrelationKind::Cross => x.dot(&row),
            CorrelationKind::Pearson => pearson(x, row).unwrap_or(0.0),
        })
        .sum();
    total / n as f64
}

/// Pearson coefficient between two vectors; `None` when either side has zero
/// variance.
pub fn pearson(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

/// Flattened mean of the order-`p` tensor power of the rows.
///
/// When `d^p` exceeds `subsample_cap`, a seeded set of index tuples is
/// sampled instead and the entries are pre-scaled by `sqrt(d^p / |subset|)`,
/// so squared distances between two vectors built with the same
/// `(order, cap, seed)` estimate the full-tensor squared distance.
pub fn moment_vector(x: &EmbeddingMatrix, order: u32, subsample_cap: usize, seed: u64) -> Array1<f64> {
    assert!(order >= 1, "order must be at least 1");
    let n = x.nrows();
    let d = x.ncols();
    assert!(n > 0, "empty set");
    let full_len = (d as f64).powi(order as i32);
    if full_len <= subsample_cap as f64 {
        let len = full_len as usize;
        let mut acc = vec![0.0f64; len];
        let mut power: Vec<f64> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        for row in x.rows() {
            power.clear();
            power.extend(row.iter());
            for _ in 1..order {
                next.clear();
                next.reserve(power.len() * d);
                for &v in &power {
                    for &r in row.iter() {
                        next.push(v * r);
                    }
                }
                std::mem::swap(&mut power, &mut next);
            }
            for (a, &v) in acc.iter_mut().zip(power.iter()) {
                *a += v;
            }
        }
        let inv_n = 1.0 / n as f64;
        Array1::from_iter(acc.into_iter().map(|v| v * inv_n))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tuples: Vec<Vec<usize>> = (0..subsample_cap)
            .map(|_| (0..order).map(|_| rng.random_range(0..d)).collect())
            .collect();
        let scale = (full_len / subsample_cap as f64).sqrt();
        let mut acc = vec![0.0f64; subsample_cap];
        for row in x.rows() {
            for (a, tuple) in acc.iter_mut().zip(tuples.iter()) {
                let mut v = 1.0;
                for &idx in tuple {
                    v *= row[idx];
                }
                *a += v;
            }
        }
        let inv_n = scale / n as f64;
        Array1::from_iter(acc.into_iter().map(|v| v * inv_n))
    }
}

pub fn squared_distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Squared norm of the mean difference; the linear-kernel MMD.
pub fn mmd_linear(x: &EmbeddingMatrix, y: &EmbeddingMatrix) -> f64 {
    assert_eq!(x.ncols(), y.ncols(), "dimension mismatch");
    squared_distance(
        &moment_vector(x, 1, usize::MAX, 0),
        &moment_vector(y, 1, usize::MAX, 0),
    )
}

/// Mean Gaussian kernel value over all cross pairs,
/// `k(u, v) = exp(-||u - v||^2 / (2 bandwidth^2))`.
pub fn gaussian_cross_mean(x: &EmbeddingMatrix, y: &EmbeddingMatrix, bandwidth: f64) -> f64 {
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    let denom = 2.0 * bandwidth * bandwidth;
    let mut total = 0.0;
    for xi in x.rows() {
        for yj in y.rows() {
            let sq: f64 = xi
                .iter()
                .zip(yj.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += (-sq / denom).exp();
        }
    }
    total / (x.nrows() * y.nrows()) as f64
}

/// Biased Gaussian-kernel MMD estimate (diagonal terms included).
///
/// The cross term is accumulated in a canonical argument order so that
/// `kmmd(x, y, s)` and `kmmd(y, x, s)` agree bit for bit.
pub fn kmmd(x: &EmbeddingMatrix, y: &EmbeddingMatrix, bandwidth: f64) -> f64 {
    assert_eq!(x.ncols(), y.ncols(), "dimension mismatch");
    let (p, q) = canonical_pair(x, y);
    gaussian_cross_mean(x, x, bandwidth) + gaussian_cross_mean(y, y, bandwidth)
        - 2.0 * gaussian_cross_mean(p, q, bandwidth)
}

fn canonical_pair<'a>(
    x: &'a EmbeddingMatrix,
    y: &'a EmbeddingMatrix,
) -> (&'a EmbeddingMatrix, &'a EmbeddingMatrix) {
    let ordering = x.nrows().cmp(&y.nrows()).then_with(|| {
        x.iter()
            .map(|v| v.to_bits())
            .cmp(y.iter().map(|v| v.to_bits()))
    });
    if ordering == std::cmp::Ordering::Greater {
        (y, x)
    } else {
        (x, y)
    }
}

/// Median-heuristic kernel bandwidth: the square root of the median pairwise
/// squared distance within `x` (1.0 for degenerate inputs).
pub fn median_heuristic_bandwidth(x: &EmbeddingMatrix) -> f64 {
    let n = x.nrows();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq);
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = if dists.len() % 2 == 1 {
        dists[dists.len() / 2]
    } else {
        0.5 * (dists[dists.len() / 2 - 1] + dists[dists.len() / 2])
    };
    if median > 0.0 {
        median.sqrt()
    } else {
        1.0
    }
}

/// Squared Frobenius distance between the order-`p` mean moment tensors.
pub fn homm(
    x: &EmbeddingMatrix,
    y: &EmbeddingMatrix,
    order: u32,
    subsample_cap: usize,
    seed: u64,
) -> f64 {
    assert_eq!(x.ncols(), y.ncols(), "dimension mismatch");
    squared_distance(
        &moment_vector(x, order, subsample_cap, seed),
        &moment_vector(y, order, subsample_cap, seed),
    )
}

/// Covariance-matrix distance between two embedding sets.
pub fn coral_distance(
    x: &EmbeddingMatrix,
    y: &EmbeddingMatrix,
    variant: CoralVariant,
    ridge: f64,
) -> Result<f64, LinalgError> {
    assert_eq!(x.ncols(), y.ncols(), "dimension mismatch");
    let c1 = covariance(x, ridge)?;
    let c2 = covariance(y, ridge)?;
    coral_distance_from_covs(&c1, &c2, variant)
}

/// The same distances computed from pre-built covariance estimates, so
/// callers scoring many candidates against one reference can cache its side.
pub fn coral_distance_from_covs(
    c1: &SpdEstimate,
    c2: &SpdEstimate,
    variant: CoralVariant,
) -> Result<f64, LinalgError> {
    assert_eq!(c1.dim, c2.dim, "dimension mismatch");
    let d = c1.dim;
    match variant {
        CoralVariant::Standard => {
            let diff = &c1.matrix - &c2.matrix;
            let sq: f64 = diff.iter().map(|v| v * v).sum();
            Ok(sq / (4.0 * (d * d) as f64))
        }
        CoralVariant::Jeff => {
            let t12 = c1.inv_trace_product(&c2.matrix)?;
            let t21 = c2.inv_trace_product(&c1.matrix)?;
            Ok(0.5 * t12 + 0.5 * t21 - d as f64)
        }
        CoralVariant::Stein => {
            let avg = (&c1.matrix + &c2.matrix) * 0.5;
            let mid = SpdEstimate::from_matrix(avg, 0.0)?;
            Ok(mid.logdet - 0.5 * (c1.logdet + c2.logdet))
        }
    }
}
