//! Applying a fitted transport plan to arbitrary embeddings.

use ndarray::{Array1, Array2, ArrayView1};

use super::TransportPlan;
use crate::types::EmbeddingMatrix;

/// A fitted optimal-transport transformation: the coupling plus the supports
/// it was fitted on, with a bandwidth for out-of-sample extension.
#[derive(Debug, Clone)]
pub struct OtTransform {
    pub plan: TransportPlan,
    pub source_support: EmbeddingMatrix,
    pub target_support: EmbeddingMatrix,
    /// Squared-distance scale of the Gaussian weights used by the
    /// out-of-sample extension; the median squared distance among the
    /// source-support rows.
    pub oos_bandwidth: f64,
    /// Barycentric image of every source-support row under the plan.
    images: Array2<f64>,
}

/// Result of mapping one embedding row through the transform.
#[derive(Debug, Clone)]
pub struct OosImage {
    pub row: Array1<f64>,
    /// True when the Gaussian weights degenerated to a single support row
    /// (every other weight underflowed), so the mapping fell back to the
    /// nearest source-support row's displacement.
    pub nearest_only: bool,
}

impl OtTransform {
    pub fn new(
        plan: TransportPlan,
        source_support: EmbeddingMatrix,
        target_support: EmbeddingMatrix,
    ) -> Self {
        assert_eq!(plan.plan.nrows(), source_support.nrows());
        assert_eq!(plan.plan.ncols(), target_support.nrows());
        let images = barycentric_images(&plan, &source_support, &target_support);
        let oos_bandwidth = median_sq_distance(&source_support).max(1e-12);
        OtTransform {
            plan,
            source_support,
            target_support,
            oos_bandwidth,
            images,
        }
    }

    /// Barycentric image of fitting-time source row `i`: the plan row,
    /// normalized, times the target support.
    pub fn barycentric_image(&self, i: usize) -> ArrayView1<'_, f64> {
        self.images.row(i)
    }

    /// Map an embedding row into target space.
    ///
    /// A row that coincides with a fitting-time source row (within 1e-12)
    /// returns that row's barycentric image exactly. Any other row gets the
    /// Gaussian-kernel weighted average of the support displacements
    /// (barycentric image minus support row) added to itself, which keeps
    /// the sample's offset from the support intact.
    pub fn transform_sample(&self, x: ArrayView1<f64>) -> OosImage {
        assert_eq!(x.len(), self.source_support.ncols(), "dimension mismatch");
        let n = self.source_support.nrows();
        let mut exponents = Vec::with_capacity(n);
        for i in 0..n {
            let s = self.source_support.row(i);
            let mut sq = 0.0;
            let mut max_abs = 0.0f64;
            for (xv, sv) in x.iter().zip(s.iter()) {
                let d = xv - sv;
                sq += d * d;
                max_abs = max_abs.max(d.abs());
            }
            if max_abs <= 1e-12 {
                return OosImage {
                    row: self.images.row(i).to_owned(),
                    nearest_only: false,
                };
            }
            exponents.push(-sq / self.oos_bandwidth);
        }
        let max_exp = exponents
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut displacement = Array1::<f64>::zeros(x.len());
        let mut live = 0usize;
        for (i, &e) in exponents.iter().enumerate() {
            let w = (e - max_exp).exp();
            if w == 0.0 {
                continue;
            }
            live += 1;
            total += w;
            let image = self.images.row(i);
            let support = self.source_support.row(i);
            for ((d, &img), &s) in displacement
                .iter_mut()
                .zip(image.iter())
                .zip(support.iter())
            {
                *d += w * (img - s);
            }
        }
        displacement.mapv_inplace(|v| v / total);
        OosImage {
            row: &x + &displacement,
            nearest_only: live == 1 && n > 1,
        }
    }
}

fn barycentric_images(
    plan: &TransportPlan,
    source_support: &EmbeddingMatrix,
    target_support: &EmbeddingMatrix,
) -> Array2<f64> {
    let n = source_support.nrows();
    let d = source_support.ncols();
    let mut images = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        let row = plan.plan.row(i);
        let mass: f64 = row.sum();
        if mass <= 0.0 {
            // zero-mass rows carry no coupling; leave them in place
            images.row_mut(i).assign(&source_support.row(i));
            continue;
        }
        for (j, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let w = p / mass;
            for (img, &t) in images.row_mut(i).iter_mut().zip(target_support.row(j).iter()) {
                *img += w * t;
            }
        }
    }
    images
}

fn median_sq_distance(rows: &EmbeddingMatrix) -> f64 {
    let n = rows.nrows();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = rows
                .row(i)
                .iter()
                .zip(rows.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d);
        }
    }
    super::cost::median(dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::cost::{build_cost_matrix, MetricTag, NormalizationTag};
    use crate::ot::emd::solve_emd;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn identity_transform(points: &EmbeddingMatrix) -> OtTransform {
        let n = points.nrows();
        let cost = build_cost_matrix(points, points, MetricTag::SqEuclidean, NormalizationTag::None);
        let a = Array1::from_elem(n, 1.0 / n as f64);
        let plan = solve_emd(&a, &a, &cost).unwrap();
        OtTransform::new(plan, points.clone(), points.clone())
    }

    #[test]
    fn identity_plan_fixes_support_rows() {
        let points = array![[0.0, 0.0], [5.0, 1.0], [9.0, -2.0]];
        let t = identity_transform(&points);
        for i in 0..3 {
            let out = t.transform_sample(points.row(i));
            for (o, p) in out.row.iter().zip(points.row(i).iter()) {
                assert_abs_diff_eq!(o, p, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn identity_plan_fixes_out_of_sample_rows() {
        let points = array![[0.0], [5.0], [9.0]];
        let t = identity_transform(&points);
        // displacements are all zero, so any x maps to itself
        let out = t.transform_sample(array![2.5].view());
        assert_abs_diff_eq!(out.row[0], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn support_rows_map_to_their_barycentric_images() {
        let xs = array![[0.0], [10.0]];
        let xt = array![[1.0], [11.0]];
        let cost = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::None);
        let a = array![0.5, 0.5];
        let plan = solve_emd(&a, &a, &cost).unwrap();
        let t = OtTransform::new(plan, xs, xt);
        // diagonal plan: hand-computed barycentric image of x = 0 is 1
        let out = t.transform_sample(array![0.0].view());
        assert_abs_diff_eq!(out.row[0], 1.0, epsilon = 1e-12);
        let out = t.transform_sample(array![10.0].view());
        assert_abs_diff_eq!(out.row[0], 11.0, epsilon = 1e-12);
        assert_eq!(t.barycentric_image(0)[0], 1.0);
    }

    #[test]
    fn single_support_applies_its_displacement() {
        let xs = array![[2.0]];
        let xt = array![[7.0]];
        let cost = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::None);
        let plan = solve_emd(&array![1.0], &array![1.0], &cost).unwrap();
        let t = OtTransform::new(plan, xs, xt);
        // at the support row: exact barycentric image
        assert_abs_diff_eq!(t.transform_sample(array![2.0].view()).row[0], 7.0, epsilon = 1e-12);
        // off support: the learned displacement (+5) is carried along
        assert_abs_diff_eq!(t.transform_sample(array![3.0].view()).row[0], 8.0, epsilon = 1e-12);
    }

    #[test]
    fn distant_sample_falls_back_to_nearest_displacement() {
        let xs = array![[0.0], [1.0]];
        let xt = array![[10.0], [11.0]];
        let cost = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::None);
        let a = array![0.5, 0.5];
        let plan = solve_emd(&a, &a, &cost).unwrap();
        let t = OtTransform::new(plan, xs, xt);
        // 1e6 is so far out that only the nearest support keeps weight
        let out = t.transform_sample(array![1e6].view());
        assert!(out.nearest_only);
        assert_abs_diff_eq!(out.row[0], 1e6 + 10.0, epsilon = 1e-6);
    }

    #[test]
    fn interpolates_displacements_between_supports() {
        let xs = array![[0.0], [2.0]];
        let xt = array![[1.0], [5.0]];
        let cost = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::None);
        let a = array![0.5, 0.5];
        let plan = solve_emd(&a, &a, &cost).unwrap();
        let t = OtTransform::new(plan, xs, xt);
        // midpoint: displacements +1 and +3 with equal weights -> +2
        let out = t.transform_sample(array![1.0].view());
        assert!(!out.nearest_only);
        assert_abs_diff_eq!(out.row[0], 3.0, epsilon = 1e-12);
    }
}
