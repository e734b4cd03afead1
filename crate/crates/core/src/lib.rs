//! Supervised domain adaptation for time-series embeddings.
//!
//! The pipeline fits one source-to-target transformation per class from a
//! small adaptation set (optimal transport or correlation alignment), picks
//! the transformation for an unlabeled sample at inference time by comparing
//! the transformed embedding against the target training embeddings with a
//! set-similarity metric, and classifies the result in target space.
//!
//! Module map:
//! - [`linalg`]: dense covariance / eigen / SVD / Cholesky kernels sized for
//!   embedding dimensions up to a few thousand.
//! - [`ot`]: cost matrices, exact EMD (transportation simplex), log-domain
//!   Sinkhorn, Laplacian- and class-regularized variants, and barycentric
//!   out-of-sample mapping.
//! - [`coral`]: closed-form correlation alignment (whiten by source,
//!   re-color by target).
//! - [`metrics`]: embedding-set similarity/distance metrics used for
//!   transformation selection (CC, PC, MMD, kMMD, HoMM, CORAL variants).
//! - [`pipeline`]: per-class transform fitting, per-sample transformation
//!   selection, classification, and upper/lower-bound evaluation.
//! - [`data`]: synthetic sinusoidal covariate-shift generator, deterministic
//!   feature extraction, and the portable embeddings file format.
//!
//! End to end on the synthetic benchmark:
//!
//! ```
//! use tsdapt_core::data::{extract_embeddings, generate_sinusoidal, Domain, SinusoidConfig, Split};
//! use tsdapt_core::metrics::MetricKind;
//! use tsdapt_core::pipeline::{
//!     evaluate, experiment_bandwidth, fit_class_transforms, fit_classifier, BoundTag,
//!     ClassifierKind, OtParams, TransformKind,
//! };
//!
//! let split = |domain, split, n, seed| {
//!     extract_embeddings(&generate_sinusoidal(&SinusoidConfig {
//!         noise_b: 0.4,
//!         domain,
//!         split,
//!         samples_per_class: n,
//!         seed,
//!     }))
//!     .unwrap()
//! };
//! let target_train = split(Domain::Target, Split::Train, 20, 1);
//! let source_adapt = split(Domain::Source, Split::Adapt, 10, 2);
//! let source_val = split(Domain::Source, Split::Val, 10, 3);
//!
//! let transforms = fit_class_transforms(
//!     &target_train,
//!     &source_adapt,
//!     TransformKind::Sinkhorn,
//!     &OtParams::default(),
//! )
//! .unwrap();
//! let classifier = fit_classifier(&target_train, ClassifierKind::NearestCentroid, 0).unwrap();
//! let metric = MetricKind::KernelMmd {
//!     bandwidth: experiment_bandwidth(&target_train),
//! };
//!
//! let selected = evaluate(
//!     &source_val, &transforms, &target_train, &metric, &classifier, BoundTag::Selected,
//! )
//! .unwrap();
//! let lower = evaluate(
//!     &source_val, &transforms, &target_train, &metric, &classifier, BoundTag::NoneLower,
//! )
//! .unwrap();
//! assert!(selected.accuracy > lower.accuracy);
//! ```

pub mod coral;
pub mod data;
pub mod linalg;
pub mod metrics;
pub mod ot;
pub mod pipeline;
pub mod types;

pub use types::{EmbeddingMatrix, LabeledEmbeddings};
