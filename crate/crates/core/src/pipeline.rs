//! The adaptation pipeline end to end: fit one source-to-target transform
//! per class, pick a transform per validation sample by embedding
//! similarity against the target training set, classify the transformed
//! embedding, and report accuracies for the selected / oracle / raw bounds.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coral::{coral_apply_row, coral_fit, CoralTransform};
use crate::linalg::{covariance, default_ridge, LinalgError, SpdEstimate};
use crate::metrics::{
    self, coral_distance_from_covs, gaussian_cross_mean, moment_vector, squared_distance,
    CorrelationKind, MetricKind, Orientation,
};
use crate::ot::{
    build_cost_matrix, solve_emd, solve_emd_laplacian, solve_sinkhorn, solve_sinkhorn_class_reg,
    ClassRegVariant, MetricTag, NormalizationTag, OtError, OtTransform,
};
use crate::types::{EmbeddingMatrix, LabeledEmbeddings};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("class {0} present in the source set has no target training rows")]
    MissingTargetClass(usize),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("no transform fitted for class {0}")]
    MissingTransform(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ot(#[from] OtError),
}

/// Which transformation family to fit per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Emd,
    EmdLaplacian,
    Sinkhorn,
    SinkhornLpL1,
    SinkhornL1L2,
    Coral,
}

/// Solver parameters shared by every per-class fit.
#[derive(Debug, Clone)]
pub struct OtParams {
    pub metric: MetricTag,
    pub normalization: NormalizationTag,
    /// Entropic regularization; interpreted relative to the largest cost
    /// entry when `normalization` is `None`, absolute otherwise.
    pub epsilon: f64,
    /// Class-group regularization weight.
    pub eta: f64,
    /// Laplacian displacement penalty weight.
    pub reg_lap: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub outer_iter: usize,
    pub max_cg_iter: usize,
    /// Covariance ridge for CORAL fits; `None` picks the trace-scaled
    /// default per class (floored to stay positive definite on degenerate,
    /// zero-variance classes).
    pub coral_ridge: Option<f64>,
}

impl Default for OtParams {
    fn default() -> Self {
        OtParams {
            metric: MetricTag::SqEuclidean,
            normalization: NormalizationTag::LogLog,
            epsilon: 0.1,
            eta: 0.5,
            reg_lap: 1.0,
            max_iter: 10_000,
            tol: 1e-6,
            outer_iter: 10,
            max_cg_iter: 20,
            coral_ridge: None,
        }
    }
}

/// One fitted per-class transformation.
#[derive(Debug, Clone)]
pub enum ClassTransform {
    Ot(Box<OtTransform>),
    Coral(CoralTransform),
}

impl ClassTransform {
    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            ClassTransform::Ot(t) => t.transform_sample(x).row,
            ClassTransform::Coral(t) => coral_apply_row(t, x),
        }
    }
}

/// The per-class transformations fitted on the adaptation split.
#[derive(Debug, Clone)]
pub struct ClassTransformSet {
    pub kind: TransformKind,
    pub per_class: BTreeMap<usize, ClassTransform>,
    pub class_count: usize,
}

impl ClassTransformSet {
    pub fn get(&self, class: usize) -> Result<&ClassTransform, PipelineError> {
        self.per_class
            .get(&class)
            .ok_or(PipelineError::MissingTransform(class))
    }
}

/// Fit one transform per class appearing in the adaptation set, matching its
/// source rows (uniform weights) to the class's target training rows.
pub fn fit_class_transforms(
    target_train: &LabeledEmbeddings,
    source_adapt: &LabeledEmbeddings,
    kind: TransformKind,
    params: &OtParams,
) -> Result<ClassTransformSet, PipelineError> {
    assert_eq!(
        target_train.dim(),
        source_adapt.dim(),
        "embedding dimensions must match"
    );
    let mut per_class = BTreeMap::new();
    for class in 0..source_adapt.class_count {
        let xs = source_adapt.class_rows(class);
        if xs.nrows() == 0 {
            continue;
        }
        let xt = target_train.class_rows(class);
        if xt.nrows() == 0 {
            return Err(PipelineError::MissingTargetClass(class));
        }
        let transform = match kind {
            TransformKind::Coral => {
                let ridge = params
                    .coral_ridge
                    .unwrap_or_else(|| default_ridge(&xs).max(default_ridge(&xt)).max(1e-12));
                ClassTransform::Coral(coral_fit(&xs, &xt, ridge)?)
            }
            _ => {
                let cost = build_cost_matrix(&xs, &xt, params.metric, params.normalization);
                let a = Array1::from_elem(xs.nrows(), 1.0 / xs.nrows() as f64);
                let b = Array1::from_elem(xt.nrows(), 1.0 / xt.nrows() as f64);
                let epsilon = match params.normalization {
                    NormalizationTag::None => {
                        let max = cost.max_entry();
                        if max > 0.0 {
                            params.epsilon * max
                        } else {
                            params.epsilon
                        }
                    }
                    _ => params.epsilon,
                };
                let labels = vec![class; xs.nrows()];
                let plan = match kind {
                    TransformKind::Emd => solve_emd(&a, &b, &cost)?,
                    TransformKind::EmdLaplacian => solve_emd_laplacian(
                        &a,
                        &b,
                        &cost,
                        &xs,
                        &xt,
                        params.reg_lap,
                        params.max_cg_iter,
                    )?,
                    TransformKind::Sinkhorn => {
                        solve_sinkhorn(&a, &b, &cost, epsilon, params.max_iter, params.tol)?
                    }
                    TransformKind::SinkhornLpL1 | TransformKind::SinkhornL1L2 => {
                        let variant = if kind == TransformKind::SinkhornLpL1 {
                            ClassRegVariant::LpL1
                        } else {
                            ClassRegVariant::L1L2
                        };
                        solve_sinkhorn_class_reg(
                            &a,
                            &b,
                            &cost,
                            &labels,
                            variant,
                            epsilon,
                            params.eta,
                            params.outer_iter,
                            params.max_iter,
                            params.tol,
                        )?
                    }
                    TransformKind::Coral => unreachable!(),
                };
                ClassTransform::Ot(Box::new(OtTransform::new(plan, xs, xt)))
            }
        };
        per_class.insert(class, transform);
    }
    Ok(ClassTransformSet {
        kind,
        per_class,
        class_count: source_adapt.class_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    NearestCentroid,
    LinearSoftmax,
}

/// Target-space classifier fitted on the target training embeddings.
#[derive(Debug, Clone)]
pub enum Classifier {
    NearestCentroid {
        centroids: Array2<f64>,
    },
    LinearSoftmax {
        weights: Array2<f64>,
        bias: Array1<f64>,
    },
}

const SOFTMAX_EPOCHS: usize = 500;
const SOFTMAX_LEARNING_RATE: f64 = 0.1;

/// Fit the classifier; every class in `0..class_count` needs at least one
/// sample. The softmax variant runs fixed-schedule full-batch gradient
/// descent from a seeded initialization, so results are reproducible.
pub fn fit_classifier(
    target_train: &LabeledEmbeddings,
    kind: ClassifierKind,
    seed: u64,
) -> Result<Classifier, PipelineError> {
    let k = target_train.class_count;
    let d = target_train.dim();
    let mut counts = vec![0usize; k];
    for &label in &target_train.labels {
        counts[label] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(PipelineError::EmptyClass(class));
    }
    match kind {
        ClassifierKind::NearestCentroid => {
            let mut centroids = Array2::<f64>::zeros((k, d));
            for (row, &label) in target_train
                .embeddings
                .rows()
                .into_iter()
                .zip(target_train.labels.iter())
            {
                let mut c = centroids.row_mut(label);
                c += &row;
            }
            for (mut c, &count) in centroids.rows_mut().into_iter().zip(counts.iter()) {
                c.mapv_inplace(|v| v / count as f64);
            }
            Ok(Classifier::NearestCentroid { centroids })
        }
        ClassifierKind::LinearSoftmax => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut weights = Array2::from_shape_fn((k, d), |_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                0.01 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            });
            let mut bias = Array1::<f64>::zeros(k);
            let n = target_train.len();
            let x = &target_train.embeddings;
            for _ in 0..SOFTMAX_EPOCHS {
                let mut grad_w = Array2::<f64>::zeros((k, d));
                let mut grad_b = Array1::<f64>::zeros(k);
                for (row, &label) in x.rows().into_iter().zip(target_train.labels.iter()) {
                    let mut logits: Vec<f64> =
                        (0..k).map(|c| weights.row(c).dot(&row) + bias[c]).collect();
                    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for l in logits.iter_mut() {
                        *l = (*l - max).exp();
                        total += *l;
                    }
                    for c in 0..k {
                        let p = logits[c] / total;
                        let delta = p - if c == label { 1.0 } else { 0.0 };
                        grad_b[c] += delta;
                        let mut gw = grad_w.row_mut(c);
                        gw.scaled_add(delta, &row);
                    }
                }
                let scale = SOFTMAX_LEARNING_RATE / n as f64;
                weights.scaled_add(-scale, &grad_w);
                bias.scaled_add(-scale, &grad_b);
            }
            Ok(Classifier::LinearSoftmax { weights, bias })
        }
    }
}

impl Classifier {
    pub fn class_count(&self) -> usize {
        match self {
            Classifier::NearestCentroid { centroids } => centroids.nrows(),
            Classifier::LinearSoftmax { weights, .. } => weights.nrows(),
        }
    }

    /// Predicted class, ties broken toward the lowest class id.
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        match self {
            Classifier::NearestCentroid { centroids } => {
                let mut best = (f64::INFINITY, 0usize);
                for (class, c) in centroids.rows().into_iter().enumerate() {
                    let d: f64 = x
                        .iter()
                        .zip(c.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d < best.0 {
                        best = (d, class);
                    }
                }
                best.1
            }
            Classifier::LinearSoftmax { weights, bias } => {
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (class, w) in weights.rows().into_iter().enumerate() {
                    let score = w.dot(&x) + bias[class];
                    if score > best.0 {
                        best = (score, class);
                    }
                }
                best.1
            }
        }
    }
}

/// Per-class metric state prepared once per evaluation, so scoring a sample
/// against class `k` only pays for the sample-side work.
pub struct ClassScorer {
    metric: MetricKind,
    class_rows: Vec<EmbeddingMatrix>,
    cache: ScorerCache,
}

enum ScorerCache {
    Plain,
    MomentVectors(Vec<Array1<f64>>),
    KernelSelfTerms(Vec<f64>),
    Covariances {
        sample_cov: SpdEstimate,
        class_covs: Vec<SpdEstimate>,
    },
}

impl ClassScorer {
    pub fn new(
        metric: MetricKind,
        target_train: &LabeledEmbeddings,
    ) -> Result<Self, PipelineError> {
        let class_rows: Vec<EmbeddingMatrix> = (0..target_train.class_count)
            .map(|c| target_train.class_rows(c))
            .collect();
        let cache = match metric {
            MetricKind::LinearMmd => ScorerCache::MomentVectors(
                class_rows
                    .iter()
                    .map(|rows| moment_vector(rows, 1, usize::MAX, 0))
                    .collect(),
            ),
            MetricKind::HighOrderMoments {
                order,
                subsample_cap,
                seed,
            } => ScorerCache::MomentVectors(
                class_rows
                    .iter()
                    .map(|rows| moment_vector(rows, order, subsample_cap, seed))
                    .collect(),
            ),
            MetricKind::KernelMmd { bandwidth } => ScorerCache::KernelSelfTerms(
                class_rows
                    .iter()
                    .map(|rows| gaussian_cross_mean(rows, rows, bandwidth))
                    .collect(),
            ),
            MetricKind::Coral { ridge, .. } => {
                // a 1-row set always has the same ridged covariance
                let d = target_train.dim();
                let sample_cov =
                    SpdEstimate::from_matrix(Array2::<f64>::eye(d) * ridge.max(1e-12), ridge)?;
                let class_covs = class_rows
                    .iter()
                    .map(|rows| covariance(rows, ridge))
                    .collect::<Result<Vec<_>, _>>()?;
                ScorerCache::Covariances {
                    sample_cov,
                    class_covs,
                }
            }
            _ => ScorerCache::Plain,
        };
        Ok(ClassScorer {
            metric,
            class_rows,
            cache,
        })
    }

    pub fn orientation(&self) -> Orientation {
        self.metric.orientation()
    }

    /// Score a transformed sample against the target rows of `class`.
    pub fn score(&self, sample: ArrayView1<f64>, class: usize) -> Result<f64, PipelineError> {
        let rows = &self.class_rows[class];
        let value = match (&self.metric, &self.cache) {
            (MetricKind::CrossCorrelation, _) => {
                metrics::correlation(sample, rows, CorrelationKind::Cross)
            }
            (MetricKind::PearsonCorrelation, _) => {
                metrics::correlation(sample, rows, CorrelationKind::Pearson)
            }
            (MetricKind::LinearMmd, ScorerCache::MomentVectors(moments)) => {
                squared_distance(&sample.to_owned(), &moments[class])
            }
            (
                MetricKind::HighOrderMoments {
                    order,
                    subsample_cap,
                    seed,
                },
                ScorerCache::MomentVectors(moments),
            ) => {
                let sample_matrix = row_matrix(sample);
                let m = moment_vector(&sample_matrix, *order, *subsample_cap, *seed);
                squared_distance(&m, &moments[class])
            }
            (MetricKind::KernelMmd { bandwidth }, ScorerCache::KernelSelfTerms(self_terms)) => {
                let sample_matrix = row_matrix(sample);
                1.0 + self_terms[class]
                    - 2.0 * gaussian_cross_mean(&sample_matrix, rows, *bandwidth)
            }
            (
                MetricKind::Coral { variant, .. },
                ScorerCache::Covariances {
                    sample_cov,
                    class_covs,
                },
            ) => coral_distance_from_covs(sample_cov, &class_covs[class], *variant)?,
            _ => unreachable!("cache matches metric kind by construction"),
        };
        Ok(value)
    }
}

fn row_matrix(row: ArrayView1<f64>) -> EmbeddingMatrix {
    let mut m = Array2::zeros((1, row.len()));
    m.row_mut(0).assign(&row);
    m
}

/// Outcome of transformation selection for one sample.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub chosen_class: usize,
    /// Score per candidate class, in ascending class order.
    pub per_class_scores: Vec<(usize, f64)>,
    pub orientation: Orientation,
    pub transformed_embedding: Array1<f64>,
}

/// Transform the sample with every candidate class transform, score each
/// against that class's target rows, pick the best (lowest class id on
/// ties), and classify the winning embedding.
pub fn select_and_classify(
    sample: ArrayView1<f64>,
    transforms: &ClassTransformSet,
    scorer: &ClassScorer,
    classifier: &Classifier,
) -> Result<(SelectionResult, usize), PipelineError> {
    let orientation = scorer.orientation();
    let mut per_class_scores = Vec::with_capacity(transforms.per_class.len());
    let mut best: Option<(f64, usize, Array1<f64>)> = None;
    for (&class, transform) in &transforms.per_class {
        let transformed = transform.apply(sample);
        let score = scorer.score(transformed.view(), class)?;
        per_class_scores.push((class, score));
        let better = match &best {
            None => true,
            Some((incumbent, _, _)) => match orientation {
                Orientation::Similarity => score > *incumbent,
                Orientation::Distance => score < *incumbent,
            },
        };
        if better {
            best = Some((score, class, transformed));
        }
    }
    let (_, chosen_class, transformed_embedding) =
        best.ok_or(PipelineError::MissingTransform(0))?;
    let predicted = classifier.predict(transformed_embedding.view());
    Ok((
        SelectionResult {
            chosen_class,
            per_class_scores,
            orientation,
            transformed_embedding,
        },
        predicted,
    ))
}

/// Evaluation protocol for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundTag {
    /// Metric-driven transformation selection (the actual method).
    Selected,
    /// True-label transformation applied to every sample.
    OracleUpper,
    /// Raw embeddings classified without any transformation.
    NoneLower,
}

impl BoundTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundTag::Selected => "selected",
            BoundTag::OracleUpper => "oracle_upper",
            BoundTag::NoneLower => "none_lower",
        }
    }
}

/// Accuracy summary over one validation split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub bound: BoundTag,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[[true, predicted]]` sample counts.
    pub confusion: Array2<usize>,
}

impl EvalReport {
    fn from_pairs(bound: BoundTag, class_count: usize, pairs: &[(usize, usize)]) -> Self {
        let mut confusion = Array2::<usize>::zeros((class_count, class_count));
        for &(truth, predicted) in pairs {
            confusion[[truth, predicted]] += 1;
        }
        let total: usize = confusion.sum();
        let trace: usize = (0..class_count).map(|c| confusion[[c, c]]).sum();
        let accuracy = if total > 0 {
            trace as f64 / total as f64
        } else {
            0.0
        };
        let per_class_accuracy = (0..class_count)
            .map(|c| {
                let row_total: usize = confusion.row(c).sum();
                if row_total > 0 {
                    confusion[[c, c]] as f64 / row_total as f64
                } else {
                    0.0
                }
            })
            .collect();
        EvalReport {
            bound,
            accuracy,
            per_class_accuracy,
            confusion,
        }
    }
}

/// Classify every validation sample under the given bound protocol.
pub fn evaluate(
    source_val: &LabeledEmbeddings,
    transforms: &ClassTransformSet,
    target_train: &LabeledEmbeddings,
    metric: &MetricKind,
    classifier: &Classifier,
    bound: BoundTag,
) -> Result<EvalReport, PipelineError> {
    let class_count = target_train.class_count;
    let mut pairs = Vec::with_capacity(source_val.len());
    match bound {
        BoundTag::Selected => {
            let scorer = ClassScorer::new(metric.clone(), target_train)?;
            for (row, &label) in source_val
                .embeddings
                .rows()
                .into_iter()
                .zip(source_val.labels.iter())
            {
                let (_, predicted) = select_and_classify(row, transforms, &scorer, classifier)?;
                pairs.push((label, predicted));
            }
        }
        BoundTag::OracleUpper => {
            for (row, &label) in source_val
                .embeddings
                .rows()
                .into_iter()
                .zip(source_val.labels.iter())
            {
                let transformed = transforms.get(label)?.apply(row);
                pairs.push((label, classifier.predict(transformed.view())));
            }
        }
        BoundTag::NoneLower => {
            for (row, &label) in source_val
                .embeddings
                .rows()
                .into_iter()
                .zip(source_val.labels.iter())
            {
                pairs.push((label, classifier.predict(row)));
            }
        }
    }
    Ok(EvalReport::from_pairs(bound, class_count, pairs.as_slice()))
}

/// Frozen kernel bandwidth for an experiment: the median heuristic over the
/// pooled target training rows.
pub fn experiment_bandwidth(target_train: &LabeledEmbeddings) -> f64 {
    metrics::median_heuristic_bandwidth(&target_train.embeddings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn labeled(embeddings: EmbeddingMatrix, labels: Vec<usize>, k: usize) -> LabeledEmbeddings {
        LabeledEmbeddings::new(embeddings, labels, k).unwrap()
    }

    fn gaussian_blobs(
        rng: &mut ChaCha8Rng,
        k: usize,
        per_class: usize,
        dim: usize,
        separation: f64,
        spread: f64,
    ) -> LabeledEmbeddings {
        let n = k * per_class;
        let mut embeddings = Array2::<f64>::zeros((n, dim));
        let mut labels = Vec::with_capacity(n);
        for class in 0..k {
            for s in 0..per_class {
                let row = class * per_class + s;
                for j in 0..dim {
                    // distinct axis per class (wrapping with a sign flip when
                    // classes outnumber dimensions)
                    let center = if j == class % dim {
                        if class < dim {
                            separation
                        } else {
                            -separation
                        }
                    } else {
                        0.0
                    };
                    let u1: f64 = rng.random::<f64>().max(1e-12);
                    let u2: f64 = rng.random();
                    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    embeddings[[row, j]] = center + spread * z;
                }
                labels.push(class);
            }
        }
        labeled(embeddings, labels, k)
    }

    #[test]
    fn nearest_centroid_memorizes_singletons() {
        let data = labeled(array![[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]], vec![0, 1, 2], 3);
        let clf = fit_classifier(&data, ClassifierKind::NearestCentroid, 0).unwrap();
        for (row, &label) in data.embeddings.rows().into_iter().zip(data.labels.iter()) {
            assert_eq!(clf.predict(row), label);
        }
    }

    #[test]
    fn both_classifiers_split_two_points_at_zero() {
        let data = labeled(array![[-1.0], [1.0]], vec![0, 1], 2);
        for kind in [ClassifierKind::NearestCentroid, ClassifierKind::LinearSoftmax] {
            let clf = fit_classifier(&data, kind, 7).unwrap();
            assert_eq!(clf.predict(array![-0.4].view()), 0, "{kind:?}");
            assert_eq!(clf.predict(array![0.4].view()), 1, "{kind:?}");
            assert_eq!(clf.predict(array![-2.0].view()), 0, "{kind:?}");
            assert_eq!(clf.predict(array![2.0].view()), 1, "{kind:?}");
        }
    }

    #[test]
    fn separated_blobs_train_to_high_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = gaussian_blobs(&mut rng, 10, 20, 5, 5.0, 1.0);
        for kind in [ClassifierKind::NearestCentroid, ClassifierKind::LinearSoftmax] {
            let clf = fit_classifier(&data, kind, 3).unwrap();
            let correct = data
                .embeddings
                .rows()
                .into_iter()
                .zip(data.labels.iter())
                .filter(|(row, &label)| clf.predict(*row) == label)
                .count();
            let accuracy = correct as f64 / data.len() as f64;
            assert!(accuracy >= 0.99, "{kind:?} trained to {accuracy}");
        }
    }

    #[test]
    fn empty_class_rejected() {
        let data = labeled(array![[0.0], [1.0]], vec![0, 0], 2);
        let err = fit_classifier(&data, ClassifierKind::NearestCentroid, 0).unwrap_err();
        assert!(matches!(err, PipelineError::EmptyClass(1)));
    }

    #[test]
    fn identity_fit_maps_support_to_itself() {
        let rows = array![[0.0, 0.0], [1.0, 0.0], [4.0, 1.0], [5.0, 1.0]];
        let data = labeled(rows.clone(), vec![0, 0, 1, 1], 2);
        let transforms =
            fit_class_transforms(&data, &data, TransformKind::Emd, &OtParams::default()).unwrap();
        assert_eq!(transforms.per_class.len(), 2);
        for (row, &label) in rows.rows().into_iter().zip(data.labels.iter()) {
            let out = transforms.get(label).unwrap().apply(row);
            for (a, b) in out.iter().zip(row.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn per_class_coral_scalar_ratio() {
        let target = labeled(
            array![[-3.0], [0.0], [3.0], [-6.0], [0.0], [6.0]],
            vec![0, 0, 0, 1, 1, 1],
            2,
        );
        let source = labeled(
            array![[-2.0], [0.0], [2.0], [-4.0], [0.0], [4.0]],
            vec![0, 0, 0, 1, 1, 1],
            2,
        );
        let params = OtParams {
            coral_ridge: Some(0.0),
            ..OtParams::default()
        };
        let transforms =
            fit_class_transforms(&target, &source, TransformKind::Coral, &params).unwrap();
        for class in 0..2 {
            match transforms.get(class).unwrap() {
                ClassTransform::Coral(t) => {
                    assert_abs_diff_eq!(t.a[[0, 0]], 1.5, epsilon = 1e-9)
                }
                _ => panic!("expected CORAL transform"),
            }
        }
    }

    #[test]
    fn sinkhorn_fit_respects_marginal_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let target = gaussian_blobs(&mut rng, 2, 3, 4, 3.0, 0.5);
        let source = gaussian_blobs(&mut rng, 2, 3, 4, 3.0, 0.5);
        let params = OtParams {
            epsilon: 0.1,
            ..OtParams::default()
        };
        let transforms =
            fit_class_transforms(&target, &source, TransformKind::Sinkhorn, &params).unwrap();
        for transform in transforms.per_class.values() {
            match transform {
                ClassTransform::Ot(t) => {
                    assert!(t.plan.max_marginal_violation() <= 1e-6);
                    assert!(t.plan.converged);
                }
                _ => panic!("expected OT transform"),
            }
        }
    }

    #[test]
    fn missing_target_class_detected() {
        let target = labeled(array![[0.0], [0.1]], vec![0, 0], 2);
        let source = labeled(array![[0.0], [5.0]], vec![0, 1], 2);
        let err =
            fit_class_transforms(&target, &source, TransformKind::Emd, &OtParams::default())
                .unwrap_err();
        assert!(matches!(err, PipelineError::MissingTargetClass(1)));
    }

    #[test]
    fn tie_break_selects_lowest_class() {
        // both classes hold identical target rows and identical transforms,
        // so scores tie exactly and class 0 wins
        let rows = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let target = labeled(rows, vec![0, 0, 1, 1], 2);
        let transforms =
            fit_class_transforms(&target, &target, TransformKind::Emd, &OtParams::default())
                .unwrap();
        let scorer = ClassScorer::new(MetricKind::CrossCorrelation, &target).unwrap();
        let clf = fit_classifier(&target, ClassifierKind::NearestCentroid, 0).unwrap();
        let (selection, predicted) =
            select_and_classify(array![1.0, 0.0].view(), &transforms, &scorer, &clf).unwrap();
        assert_eq!(selection.chosen_class, 0);
        assert_eq!(selection.orientation, Orientation::Similarity);
        assert_eq!(selection.per_class_scores.len(), 2);
        assert_eq!(predicted, 0);
    }

    #[test]
    fn well_separated_clusters_select_their_own_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        // spread 0.05 against separation 5.0: within-class spread is 100x
        // smaller than the class gap
        let target = gaussian_blobs(&mut rng, 4, 12, 5, 5.0, 0.05);
        let transforms =
            fit_class_transforms(&target, &target, TransformKind::Emd, &OtParams::default())
                .unwrap();
        let scorer = ClassScorer::new(MetricKind::LinearMmd, &target).unwrap();
        let clf = fit_classifier(&target, ClassifierKind::NearestCentroid, 0).unwrap();
        let probe = gaussian_blobs(&mut rng, 4, 2, 5, 5.0, 0.05);
        for (row, &label) in probe.embeddings.rows().into_iter().zip(probe.labels.iter()) {
            let (selection, predicted) =
                select_and_classify(row, &transforms, &scorer, &clf).unwrap();
            assert_eq!(selection.chosen_class, label);
            assert_eq!(predicted, label);
        }
    }

    #[test]
    fn no_shift_makes_all_bounds_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let target = gaussian_blobs(&mut rng, 3, 10, 4, 4.0, 0.3);
        // adaptation set IS the target train set: per-class EMD finds the
        // zero-cost diagonal plan, so every transform is the identity
        let transforms =
            fit_class_transforms(&target, &target, TransformKind::Emd, &OtParams::default())
                .unwrap();
        let val = gaussian_blobs(&mut rng, 3, 8, 4, 4.0, 0.3);
        let clf = fit_classifier(&target, ClassifierKind::NearestCentroid, 0).unwrap();
        let metric = MetricKind::LinearMmd;
        let selected =
            evaluate(&val, &transforms, &target, &metric, &clf, BoundTag::Selected).unwrap();
        let lower =
            evaluate(&val, &transforms, &target, &metric, &clf, BoundTag::NoneLower).unwrap();
        let oracle =
            evaluate(&val, &transforms, &target, &metric, &clf, BoundTag::OracleUpper).unwrap();
        assert_eq!(selected.accuracy, lower.accuracy);
        assert_eq!(oracle.accuracy, lower.accuracy);
        assert_eq!(selected.confusion, lower.confusion);
    }

    #[test]
    fn evaluate_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let target = gaussian_blobs(&mut rng, 3, 8, 4, 3.0, 0.5);
        let source = gaussian_blobs(&mut rng, 3, 5, 4, 3.0, 0.5);
        let val = gaussian_blobs(&mut rng, 3, 6, 4, 3.0, 0.5);
        let transforms =
            fit_class_transforms(&target, &source, TransformKind::Sinkhorn, &OtParams::default())
                .unwrap();
        let clf = fit_classifier(&target, ClassifierKind::LinearSoftmax, 9).unwrap();
        let metric = MetricKind::KernelMmd {
            bandwidth: experiment_bandwidth(&target),
        };
        let run = || {
            evaluate(&val, &transforms, &target, &metric, &clf, BoundTag::Selected).unwrap()
        };
        let first = run();
        let second = run();
        assert_eq!(first, second);
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let target = gaussian_blobs(&mut rng, 4, 6, 3, 3.0, 0.8);
        let val = gaussian_blobs(&mut rng, 4, 9, 3, 3.0, 0.8);
        let transforms =
            fit_class_transforms(&target, &target, TransformKind::Emd, &OtParams::default())
                .unwrap();
        let clf = fit_classifier(&target, ClassifierKind::NearestCentroid, 0).unwrap();
        let report = evaluate(
            &val,
            &transforms,
            &target,
            &MetricKind::CrossCorrelation,
            &clf,
            BoundTag::Selected,
        )
        .unwrap();
        for class in 0..4 {
            let row_sum: usize = report.confusion.row(class).sum();
            assert_eq!(row_sum, 9);
        }
        let trace: usize = (0..4).map(|c| report.confusion[[c, c]]).sum();
        assert_abs_diff_eq!(report.accuracy, trace as f64 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn oracle_dominates_selection_over_seeded_runs() {
        // domain shift: source clouds are shifted copies of the target
        let mut failures = 0u32;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let target = gaussian_blobs(&mut rng, 3, 12, 4, 4.0, 0.4);
            let mut source = gaussian_blobs(&mut rng, 3, 6, 4, 4.0, 0.4);
            source.embeddings.mapv_inplace(|v| -v);
            let mut val = gaussian_blobs(&mut rng, 3, 8, 4, 4.0, 0.4);
            val.embeddings.mapv_inplace(|v| -v);
            let transforms = fit_class_transforms(
                &target,
                &source,
                TransformKind::Sinkhorn,
                &OtParams::default(),
            )
            .unwrap();
            let clf = fit_classifier(&target, ClassifierKind::NearestCentroid, 0).unwrap();
            let metric = MetricKind::KernelMmd {
                bandwidth: experiment_bandwidth(&target),
            };
            let selected =
                evaluate(&val, &transforms, &target, &metric, &clf, BoundTag::Selected).unwrap();
            let oracle = evaluate(
                &val,
                &transforms,
                &target,
                &metric,
                &clf,
                BoundTag::OracleUpper,
            )
            .unwrap();
            if oracle.accuracy < selected.accuracy - 0.01 {
                failures += 1;
            }
        }
        assert_eq!(failures, 0, "oracle fell below selection beyond slack");
    }
}
