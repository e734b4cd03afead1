//! Shared data types passed between modules.

use ndarray::Array2;
use thiserror::Error;

/// An `n x d` matrix of sample feature embeddings, one row per sample.
pub type EmbeddingMatrix = Array2<f64>;

/// Embeddings paired with per-row class labels; one domain split
/// (target train, source adaptation, or source validation).
#[derive(Debug, Clone)]
pub struct LabeledEmbeddings {
    pub embeddings: EmbeddingMatrix,
    pub labels: Vec<usize>,
    /// Number of classes; labels are in `0..class_count`.
    pub class_count: usize,
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("label count {labels} does not match row count {rows}")]
    LengthMismatch { labels: usize, rows: usize },
    #[error("label {label} out of range for {class_count} classes")]
    OutOfRange { label: usize, class_count: usize },
}

impl LabeledEmbeddings {
    pub fn new(
        embeddings: EmbeddingMatrix,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self, LabelError> {
        if labels.len() != embeddings.nrows() {
            return Err(LabelError::LengthMismatch {
                labels: labels.len(),
                rows: embeddings.nrows(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(LabelError::OutOfRange { label, class_count });
        }
        Ok(Self {
            embeddings,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Embedding dimensionality (columns).
    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    /// Row indices belonging to `class`.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// The rows of `class` gathered into a fresh matrix.
    pub fn class_rows(&self, class: usize) -> EmbeddingMatrix {
        let idx = self.class_indices(class);
        let mut out = Array2::zeros((idx.len(), self.dim()));
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).assign(&self.embeddings.row(i));
        }
        out
    }
}
