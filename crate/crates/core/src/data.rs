//! Synthetic sinusoidal covariate-shift benchmark data, the deterministic
//! feature extractor, and the portable embeddings file format.
//!
//! Ten classes of 200-step sinusoids with distinct integer frequencies; the
//! target domain adds one-sided uniform noise, the source domain flips the
//! sign of the signal (the covariate shift) and adds half-scale noise to its
//! adaptation split. Features are non-overlapping window means (width 4), a
//! linear, sign-preserving map to 50 dimensions.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::types::LabeledEmbeddings;

/// Number of signal classes.
pub const CLASS_COUNT: usize = 10;
/// Time steps per series.
pub const SERIES_LEN: usize = 200;
/// Window width of the feature extractor.
pub const WINDOW: usize = 4;
/// Embedding dimensionality produced by [`extract_embedding`].
pub const EMBED_DIM: usize = SERIES_LEN / WINDOW;

pub const FILE_MAGIC: &str = "tsdapt-embeddings";
pub const FILE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Target,
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Adapt,
    Val,
}

/// Generation parameters for one domain split.
#[derive(Debug, Clone)]
pub struct SinusoidConfig {
    /// Upper bound of the one-sided uniform noise; in `[0, 1.9]`.
    pub noise_b: f64,
    pub domain: Domain,
    pub split: Split,
    pub samples_per_class: usize,
    pub seed: u64,
}

/// Generated raw series with labels.
#[derive(Debug, Clone)]
pub struct RawDataset {
    /// `n x SERIES_LEN` signal rows.
    pub series: Array2<f64>,
    pub labels: Vec<usize>,
    pub domain: Domain,
    pub split: Split,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("series must have {expected} steps, got {got}")]
    InvalidLength { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Noise level for a (domain, split) pair: the source training/adaptation
/// splits get half the sweep level, everything else the full level.
fn noise_bound(cfg: &SinusoidConfig) -> f64 {
    match (cfg.domain, cfg.split) {
        (Domain::Source, Split::Train) | (Domain::Source, Split::Adapt) => cfg.noise_b / 2.0,
        _ => cfg.noise_b,
    }
}

/// Clean class-`k` signal at step `t`: `sin(2 pi (k+1) t / 200)`; the source
/// domain sees it negated.
pub fn clean_signal(class: usize, t: usize, domain: Domain) -> f64 {
    let value =
        (2.0 * std::f64::consts::PI * (class as f64 + 1.0) * t as f64 / SERIES_LEN as f64).sin();
    match domain {
        Domain::Target => value,
        Domain::Source => -value,
    }
}

/// Deterministically generate the configured split: same config, same bits.
pub fn generate_sinusoidal(cfg: &SinusoidConfig) -> RawDataset {
    assert!(
        (0.0..=1.9).contains(&cfg.noise_b),
        "noise_b must lie in [0, 1.9]"
    );
    let n = CLASS_COUNT * cfg.samples_per_class;
    let mut series = Array2::<f64>::zeros((n, SERIES_LEN));
    let mut labels = Vec::with_capacity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = noise_bound(cfg);
    let mut row = 0;
    for class in 0..CLASS_COUNT {
        for _ in 0..cfg.samples_per_class {
            for t in 0..SERIES_LEN {
                let noise = if bound > 0.0 {
                    rng.random::<f64>() * bound
                } else {
                    0.0
                };
                series[[row, t]] = clean_signal(class, t, cfg.domain) + noise;
            }
            labels.push(class);
            row += 1;
        }
    }
    RawDataset {
        series,
        labels,
        domain: cfg.domain,
        split: cfg.split,
    }
}

/// Non-overlapping window means: 200 steps in, 50 features out. Linear in
/// the input, so the source domain's sign flip survives extraction.
pub fn extract_embedding(series: ArrayView1<f64>) -> Result<Array1<f64>, DataError> {
    if series.len() != SERIES_LEN {
        return Err(DataError::InvalidLength {
            expected: SERIES_LEN,
            got: series.len(),
        });
    }
    let mut out = Array1::<f64>::zeros(EMBED_DIM);
    for j in 0..EMBED_DIM {
        let mut acc = 0.0;
        for t in j * WINDOW..(j + 1) * WINDOW {
            acc += series[t];
        }
        out[j] = acc / WINDOW as f64;
    }
    Ok(out)
}

/// Extract every row of a raw dataset.
pub fn extract_embeddings(raw: &RawDataset) -> Result<LabeledEmbeddings, DataError> {
    let n = raw.series.nrows();
    let mut embeddings = Array2::<f64>::zeros((n, EMBED_DIM));
    for (i, series) in raw.series.rows().into_iter().enumerate() {
        embeddings.row_mut(i).assign(&extract_embedding(series)?);
    }
    Ok(LabeledEmbeddings {
        embeddings,
        labels: raw.labels.clone(),
        class_count: CLASS_COUNT,
    })
}

/// Write the text embeddings format:
/// header `tsdapt-embeddings,v1,<d>,<K>`, then one `label,v1,...,vd` line
/// per sample with round-trippable decimal floats, LF line endings.
pub fn write_embeddings_file(path: &Path, data: &LabeledEmbeddings) -> Result<(), DataError> {
    let mut body = String::new();
    writeln!(
        body,
        "{FILE_MAGIC},{FILE_VERSION},{},{}",
        data.dim(),
        data.class_count
    )
    .expect("string write");
    for (row, &label) in data.embeddings.rows().into_iter().zip(data.labels.iter()) {
        write!(body, "{label}").expect("string write");
        for v in row.iter() {
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line: 0,
                    message: format!("refusing to write non-finite value {v}"),
                });
            }
            write!(body, ",{v}").expect("string write");
        }
        body.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(body.as_bytes())?;
    Ok(())
}

/// Read the embeddings format back; errors carry 1-based line numbers.
pub fn read_embeddings_file(path: &Path) -> Result<LabeledEmbeddings, DataError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| DataError::Parse {
            line: 1,
            message: "empty file, expected a header".into(),
        })??;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 4 {
        return Err(DataError::Parse {
            line: 1,
            message: format!("header must have 4 fields, got {}", parts.len()),
        });
    }
    if parts[0] != FILE_MAGIC {
        return Err(DataError::Parse {
            line: 1,
            message: format!("unknown magic {:?}", parts[0]),
        });
    }
    if parts[1] != FILE_VERSION {
        return Err(DataError::Parse {
            line: 1,
            message: format!("unsupported version {:?}", parts[1]),
        });
    }
    let dim: usize = parts[2].parse().map_err(|_| DataError::Parse {
        line: 1,
        message: format!("bad dimension field {:?}", parts[2]),
    })?;
    let class_count: usize = parts[3].parse().map_err(|_| DataError::Parse {
        line: 1,
        message: format!("bad class-count field {:?}", parts[3]),
    })?;
    if dim == 0 || class_count == 0 {
        return Err(DataError::Parse {
            line: 1,
            message: "dimension and class count must be positive".into(),
        });
    }
    let mut labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() {
            return Err(DataError::Parse {
                line: line_no,
                message: "empty line".into(),
            });
        }
        let mut fields = line.split(',');
        let label_field = fields.next().expect("split yields at least one field");
        let label: usize = label_field.parse().map_err(|_| DataError::Parse {
            line: line_no,
            message: format!("bad label {label_field:?}"),
        })?;
        if label >= class_count {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("label {label} out of range for {class_count} classes"),
            });
        }
        let mut count = 0usize;
        for field in fields {
            let v: f64 = field.parse().map_err(|_| DataError::Parse {
                line: line_no,
                message: format!("non-numeric cell {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("non-finite cell {field:?}"),
                });
            }
            values.push(v);
            count += 1;
        }
        if count != dim {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected {dim} values, got {count}"),
            });
        }
        labels.push(label);
    }
    let n = labels.len();
    let embeddings =
        Array2::from_shape_vec((n, dim), values).expect("row lengths already validated");
    Ok(LabeledEmbeddings {
        embeddings,
        labels,
        class_count,
    })
}
