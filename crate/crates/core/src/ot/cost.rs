//! Pairwise transport cost matrices with the supported metric families and
//! cost normalizations.

use ndarray::{Array2, ArrayView1};

use crate::types::EmbeddingMatrix;

/// Ground metric used for transport costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricTag {
    /// Squared Euclidean distance (the default ground cost).
    SqEuclidean,
    Euclidean,
    Cityblock,
    Cosine,
    Minkowski(f64),
}

impl MetricTag {
    pub fn distance(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match *self {
            MetricTag::SqEuclidean => x
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
            MetricTag::Euclidean => {
                let sq: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                sq.sqrt()
            }
            MetricTag::Cityblock => x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum(),
            MetricTag::Cosine => {
                let dot: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
                if nx == 0.0 && ny == 0.0 {
                    0.0
                } else if nx == 0.0 || ny == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (nx * ny)
                }
            }
            MetricTag::Minkowski(p) => {
                let s: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b).abs().powf(p))
                    .sum();
                s.powf(1.0 / p)
            }
        }
    }
}

/// Rescaling applied to the raw cost entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationTag {
    /// Divide every entry by the median entry.
    Median,
    /// Divide every entry by the maximum entry.
    Max,
    /// `m <- log(1 + m)`; keeps zero-cost entries at zero.
    Log,
    /// `m <- log(1 + log(1 + m))`.
    LogLog,
    None,
}

/// Nonnegative `n_source x n_target` cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub entries: Array2<f64>,
    pub metric: MetricTag,
    pub normalization: NormalizationTag,
    /// Set when a median/max normalization was requested but the divisor was
    /// zero (all-zero costs), so the normalization was skipped.
    pub normalization_skipped: bool,
}

impl CostMatrix {
    pub fn n_source(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_target(&self) -> usize {
        self.entries.ncols()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    /// Wrap an externally produced matrix (used by solvers and tests that
    /// build costs directly).
    pub fn from_entries(entries: Array2<f64>) -> Self {
        CostMatrix {
            entries,
            metric: MetricTag::SqEuclidean,
            normalization: NormalizationTag::None,
            normalization_skipped: false,
        }
    }
}

/// Entry `(i, j)` gets `metric(xs_i, xt_j)`, then the normalization is
/// applied to every entry.
pub fn build_cost_matrix(
    xs: &EmbeddingMatrix,
    xt: &EmbeddingMatrix,
    metric: MetricTag,
    normalization: NormalizationTag,
) -> CostMatrix {
    assert_eq!(
        xs.ncols(),
        xt.ncols(),
        "source and target must share the embedding dimension"
    );
    let (ns, nt) = (xs.nrows(), xt.nrows());
    let mut entries = Array2::<f64>::zeros((ns, nt));
    for i in 0..ns {
        let xi = xs.row(i);
        for j in 0..nt {
            entries[[i, j]] = metric.distance(xi, xt.row(j));
        }
    }
    let mut skipped = false;
    match normalization {
        NormalizationTag::Median => {
            let med = median(entries.iter().cloned().collect());
            if med > 0.0 {
                entries.mapv_inplace(|m| m / med);
            } else {
                skipped = true;
            }
        }
        NormalizationTag::Max => {
            let max = entries.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                entries.mapv_inplace(|m| m / max);
            } else {
                skipped = true;
            }
        }
        NormalizationTag::Log => entries.mapv_inplace(|m| (1.0 + m).ln()),
        NormalizationTag::LogLog => entries.mapv_inplace(|m| (1.0 + (1.0 + m).ln()).ln()),
        NormalizationTag::None => {}
    }
    CostMatrix {
        entries,
        metric,
        normalization,
        normalization_skipped: skipped,
    }
}

/// Median with the even-count convention of averaging the two middle values.
pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn identical_points_cost_zero() {
        let x = array![[1.0, 2.0]];
        let c = build_cost_matrix(&x, &x, MetricTag::SqEuclidean, NormalizationTag::None);
        assert_eq!(c.entries, array![[0.0]]);
        assert!(!c.normalization_skipped);
    }

    #[test]
    fn sqeuclidean_single_pair() {
        let xs = array![[0.0, 0.0]];
        let xt = array![[1.0, 1.0]];
        let c = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::None);
        assert_abs_diff_eq!(c.entries[[0, 0]], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn max_normalization_hand_oracle() {
        // raw [[0,4],[1,1]] divided by 4
        let xs = array![[0.0], [1.0]];
        let xt = array![[0.0], [2.0]];
        let c = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::Max);
        assert_eq!(c.entries, array![[0.0, 1.0], [0.25, 0.25]]);
    }

    #[test]
    fn zero_matrix_normalization_skipped() {
        let x = array![[1.0], [1.0]];
        let c = build_cost_matrix(&x, &x, MetricTag::SqEuclidean, NormalizationTag::Max);
        assert!(c.normalization_skipped);
        assert_eq!(c.entries[[0, 1]], 0.0);

        let c = build_cost_matrix(&x, &x, MetricTag::SqEuclidean, NormalizationTag::Median);
        assert!(c.normalization_skipped);
    }

    #[test]
    fn log_normalizations_are_monotone() {
        let xs = array![[0.0], [0.5], [3.0]];
        let xt = array![[1.0], [-2.0]];
        let raw = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::None);
        for norm in [NormalizationTag::Log, NormalizationTag::LogLog] {
            let mapped = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, norm);
            let mut pairs: Vec<(f64, f64)> = raw
                .entries
                .iter()
                .cloned()
                .zip(mapped.entries.iter().cloned())
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in pairs.windows(2) {
                assert!(
                    w[1].1 >= w[0].1,
                    "order not preserved under {norm:?}: {pairs:?}"
                );
            }
            assert!(mapped.entries.iter().all(|m| m.is_finite() && *m >= 0.0));
        }
    }

    #[test]
    fn metric_variants_agree_with_hand_values() {
        let x = array![[0.0, 0.0]];
        let y = array![[3.0, 4.0]];
        let d = |m: MetricTag| m.distance(x.row(0), y.row(0));
        assert_abs_diff_eq!(d(MetricTag::SqEuclidean), 25.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d(MetricTag::Euclidean), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d(MetricTag::Cityblock), 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d(MetricTag::Minkowski(3.0)), (27.0f64 + 64.0).cbrt(), epsilon = 1e-12);
        // cosine of orthogonal unit-ish vectors
        let a = array![[1.0, 0.0]];
        let b = array![[0.0, 2.0]];
        assert_abs_diff_eq!(
            MetricTag::Cosine.distance(a.row(0), b.row(0)),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn median_even_count_averages_middles() {
        assert_abs_diff_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(median(vec![5.0, 1.0, 3.0]), 3.0, epsilon = 1e-15);
    }
}
