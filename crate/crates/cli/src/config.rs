//! Flat key=value experiment configuration.

use std::collections::BTreeSet;
use std::path::Path;

use tsdapt_core::metrics::{CoralVariant, MetricKind};
use tsdapt_core::ot::{MetricTag, NormalizationTag};
use tsdapt_core::pipeline::{
    experiment_bandwidth, BoundTag, ClassifierKind, OtParams, TransformKind,
};
use tsdapt_core::LabeledEmbeddings;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SyntheticSweep,
    FromFiles,
}

/// Selection metric as configured; bandwidth and seeds are materialized per
/// run so `auto` settings can be frozen from the target training split.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Cc,
    Pc,
    Mmd,
    Kmmd { bandwidth: Option<f64> },
    Homm { order: u32, cap: usize },
    Coral { variant: CoralVariant, ridge: f64 },
}

impl MetricSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::Cc => "cc",
            MetricSpec::Pc => "pc",
            MetricSpec::Mmd => "mmd",
            MetricSpec::Kmmd { .. } => "kmmd",
            MetricSpec::Homm { .. } => "homm",
            MetricSpec::Coral { variant, .. } => match variant {
                CoralVariant::Standard => "coral",
                CoralVariant::Jeff => "coral_jeff",
                CoralVariant::Stein => "coral_stein",
            },
        }
    }

    pub fn materialize(&self, target_train: &LabeledEmbeddings, seed: u64) -> MetricKind {
        match *self {
            MetricSpec::Cc => MetricKind::CrossCorrelation,
            MetricSpec::Pc => MetricKind::PearsonCorrelation,
            MetricSpec::Mmd => MetricKind::LinearMmd,
            MetricSpec::Kmmd { bandwidth } => MetricKind::KernelMmd {
                bandwidth: bandwidth.unwrap_or_else(|| experiment_bandwidth(target_train)),
            },
            MetricSpec::Homm { order, cap } => MetricKind::HighOrderMoments {
                order,
                subsample_cap: cap,
                seed,
            },
            MetricSpec::Coral { variant, ridge } => MetricKind::Coral { variant, ridge },
        }
    }
}

pub fn transform_name(kind: TransformKind) -> &'static str {
    match kind {
        TransformKind::Emd => "emd",
        TransformKind::EmdLaplacian => "semd",
        TransformKind::Sinkhorn => "sinkhorn",
        TransformKind::SinkhornLpL1 => "sinkhorn_lpl1",
        TransformKind::SinkhornL1L2 => "sinkhorn_l1l2",
        TransformKind::Coral => "coral",
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub transform: TransformKind,
    pub ot_params: OtParams,
    pub metric: MetricSpec,
    pub classifier: ClassifierKind,
    pub bounds: Vec<BoundTag>,
    /// Noise levels in tenths (0..=19), sorted and deduplicated.
    pub b_grid: Vec<u8>,
    pub seeds: Vec<u64>,
    pub train_per_class: usize,
    pub adapt_per_class: usize,
    pub val_per_class: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            transform: TransformKind::Sinkhorn,
            ot_params: OtParams::default(),
            metric: MetricSpec::Kmmd { bandwidth: None },
            classifier: ClassifierKind::NearestCentroid,
            bounds: vec![BoundTag::Selected, BoundTag::OracleUpper, BoundTag::NoneLower],
            b_grid: (0..=19).collect(),
            seeds: (0..10).collect(),
            train_per_class: 100,
            adapt_per_class: 50,
            val_per_class: 50,
        }
    }
}

fn config_err(message: impl Into<String>) -> RunError {
    RunError::Config(message.into())
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", idx + 1)))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value)
                .map_err(|e| config_err(format!("line {}: {}", idx + 1, message_of(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.b_grid.is_empty() {
            return Err(config_err("b_grid must contain at least one value"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds must contain at least one value"));
        }
        if self.bounds.is_empty() {
            return Err(config_err("bounds must contain at least one entry"));
        }
        if self.train_per_class == 0 || self.adapt_per_class == 0 || self.val_per_class == 0 {
            return Err(config_err("per-class sample counts must be positive"));
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        match key {
            "mode" => {
                self.mode = Some(match value {
                    "synthetic_sweep" => Mode::SyntheticSweep,
                    "from_files" => Mode::FromFiles,
                    other => return Err(config_err(format!("unknown mode {other:?}"))),
                })
            }
            "transform" => self.transform = parse_transform(value)?,
            "cost_metric" => self.ot_params.metric = parse_cost_metric(value)?,
            "cost_normalization" => {
                self.ot_params.normalization = match value {
                    "median" => NormalizationTag::Median,
                    "max" => NormalizationTag::Max,
                    "log" => NormalizationTag::Log,
                    "loglog" => NormalizationTag::LogLog,
                    "none" => NormalizationTag::None,
                    other => {
                        return Err(config_err(format!("unknown cost normalization {other:?}")))
                    }
                }
            }
            "epsilon" => self.ot_params.epsilon = parse_positive(key, value)?,
            "eta" => self.ot_params.eta = parse_nonnegative(key, value)?,
            "reg_lap" => self.ot_params.reg_lap = parse_nonnegative(key, value)?,
            "sinkhorn_max_iter" => self.ot_params.max_iter = parse_count(key, value)?,
            "sinkhorn_tol" => self.ot_params.tol = parse_positive(key, value)?,
            "outer_iter" => self.ot_params.outer_iter = parse_count(key, value)?,
            "max_cg_iter" => self.ot_params.max_cg_iter = parse_count(key, value)?,
            "coral_ridge" => {
                self.ot_params.coral_ridge = if value == "auto" {
                    None
                } else {
                    Some(parse_nonnegative(key, value)?)
                }
            }
            "selection_metric" => self.metric = parse_metric(value, &self.metric)?,
            "kmmd_bandwidth" => {
                let bandwidth = if value == "auto" {
                    None
                } else {
                    Some(parse_positive(key, value)?)
                };
                if let MetricSpec::Kmmd { bandwidth: b } = &mut self.metric {
                    *b = bandwidth;
                } else if bandwidth.is_some() {
                    self.metric = MetricSpec::Kmmd { bandwidth };
                }
            }
            "homm_order" => {
                let order = parse_count(key, value)? as u32;
                if let MetricSpec::Homm { order: o, .. } = &mut self.metric {
                    *o = order;
                } else {
                    self.metric = MetricSpec::Homm {
                        order,
                        cap: 1_000_000,
                    };
                }
            }
            "homm_cap" => {
                let cap = parse_count(key, value)?;
                if let MetricSpec::Homm { cap: c, .. } = &mut self.metric {
                    *c = cap;
                } else {
                    self.metric = MetricSpec::Homm { order: 3, cap };
                }
            }
            "metric_ridge" => {
                let ridge = parse_nonnegative(key, value)?;
                if let MetricSpec::Coral { ridge: r, .. } = &mut self.metric {
                    *r = ridge;
                }
            }
            "classifier" => {
                self.classifier = match value {
                    "nearest_centroid" => ClassifierKind::NearestCentroid,
                    "linear_softmax" => ClassifierKind::LinearSoftmax,
                    other => return Err(config_err(format!("unknown classifier {other:?}"))),
                }
            }
            "bounds" => {
                let mut bounds = Vec::new();
                for part in value.split(',') {
                    let bound = match part.trim() {
                        "selected" => BoundTag::Selected,
                        "oracle_upper" => BoundTag::OracleUpper,
                        "none_lower" => BoundTag::NoneLower,
                        other => return Err(config_err(format!("unknown bound {other:?}"))),
                    };
                    if !bounds.contains(&bound) {
                        bounds.push(bound);
                    }
                }
                self.bounds = bounds;
            }
            "b_grid" => self.b_grid = parse_b_grid(value)?,
            "seeds" => {
                let mut seeds = Vec::new();
                for part in value.split(',').filter(|p| !p.trim().is_empty()) {
                    seeds.push(
                        part.trim()
                            .parse::<u64>()
                            .map_err(|_| config_err(format!("bad seed {part:?}")))?,
                    );
                }
                self.seeds = seeds;
            }
            "train_per_class" => self.train_per_class = parse_count(key, value)?,
            "adapt_per_class" => self.adapt_per_class = parse_count(key, value)?,
            "val_per_class" => self.val_per_class = parse_count(key, value)?,
            other => return Err(config_err(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

fn message_of(err: RunError) -> String {
    match err {
        RunError::Config(m) | RunError::Input(m) | RunError::Numerical(m) | RunError::Output(m) => m,
    }
}

pub fn parse_transform(value: &str) -> Result<TransformKind, RunError> {
    Ok(match value {
        "emd" => TransformKind::Emd,
        "semd" | "emd_laplacian" => TransformKind::EmdLaplacian,
        "sinkhorn" => TransformKind::Sinkhorn,
        "sinkhorn_lpl1" => TransformKind::SinkhornLpL1,
        "sinkhorn_l1l2" => TransformKind::SinkhornL1L2,
        "coral" => TransformKind::Coral,
        other => return Err(config_err(format!("unknown transform {other:?}"))),
    })
}

pub fn parse_metric(value: &str, current: &MetricSpec) -> Result<MetricSpec, RunError> {
    Ok(match value {
        "cc" => MetricSpec::Cc,
        "pc" => MetricSpec::Pc,
        "mmd" => MetricSpec::Mmd,
        "kmmd" => match current {
            MetricSpec::Kmmd { bandwidth } => MetricSpec::Kmmd {
                bandwidth: *bandwidth,
            },
            _ => MetricSpec::Kmmd { bandwidth: None },
        },
        "homm" => match current {
            MetricSpec::Homm { order, cap } => MetricSpec::Homm {
                order: *order,
                cap: *cap,
            },
            _ => MetricSpec::Homm {
                order: 3,
                cap: 1_000_000,
            },
        },
        "coral" | "coral_jeff" | "coral_stein" => {
            let variant = match value {
                "coral" => CoralVariant::Standard,
                "coral_jeff" => CoralVariant::Jeff,
                _ => CoralVariant::Stein,
            };
            let ridge = match current {
                MetricSpec::Coral { ridge, .. } => *ridge,
                _ => 1e-6,
            };
            MetricSpec::Coral { variant, ridge }
        }
        other => return Err(config_err(format!("unknown selection metric {other:?}"))),
    })
}

fn parse_cost_metric(value: &str) -> Result<MetricTag, RunError> {
    if let Some(p) = value.strip_prefix("minkowski:") {
        let p: f64 = p
            .parse()
            .map_err(|_| config_err(format!("bad minkowski order {p:?}")))?;
        if p < 1.0 {
            return Err(config_err("minkowski order must be >= 1"));
        }
        return Ok(MetricTag::Minkowski(p));
    }
    Ok(match value {
        "sqeuclidean" => MetricTag::SqEuclidean,
        "euclidean" => MetricTag::Euclidean,
        "cityblock" => MetricTag::Cityblock,
        "cosine" => MetricTag::Cosine,
        other => return Err(config_err(format!("unknown cost metric {other:?}"))),
    })
}

fn parse_b_grid(value: &str) -> Result<Vec<u8>, RunError> {
    if value == "full" {
        return Ok((0..=19).collect());
    }
    let mut grid = BTreeSet::new();
    for part in value.split(',').filter(|p| !p.trim().is_empty()) {
        let b: f64 = part
            .trim()
            .parse()
            .map_err(|_| config_err(format!("bad b value {part:?}")))?;
        let tenths = (b * 10.0).round();
        if (b * 10.0 - tenths).abs() > 1e-6 || !(0.0..=19.0).contains(&tenths) {
            return Err(config_err(format!(
                "b value {b} must lie on the 0.0..=1.9 grid in steps of 0.1"
            )));
        }
        grid.insert(tenths as u8);
    }
    Ok(grid.into_iter().collect())
}

fn parse_positive(key: &str, value: &str) -> Result<f64, RunError> {
    let v: f64 = value
        .parse()
        .map_err(|_| config_err(format!("bad number for {key}: {value:?}")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(config_err(format!("{key} must be positive, got {value}")));
    }
    Ok(v)
}

fn parse_nonnegative(key: &str, value: &str) -> Result<f64, RunError> {
    let v: f64 = value
        .parse()
        .map_err(|_| config_err(format!("bad number for {key}: {value:?}")))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(config_err(format!("{key} must be nonnegative, got {value}")));
    }
    Ok(v)
}

fn parse_count(key: &str, value: &str) -> Result<usize, RunError> {
    let v: usize = value
        .parse()
        .map_err(|_| config_err(format!("bad count for {key}: {value:?}")))?;
    if v == 0 {
        return Err(config_err(format!("{key} must be positive")));
    }
    Ok(v)
}
