//! Deterministic CSV emission: per-run rows, aggregated means/stddevs, and
//! stable ordering regardless of completion order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use tsdapt_core::pipeline::BoundTag;

use crate::RunError;

/// One (noise level, seed, bound) accuracy measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Noise level in tenths, 0..=19.
    pub b_tenths: u8,
    pub seed: u64,
    pub bound: BoundTag,
    pub metric: &'static str,
    pub transform: &'static str,
    pub accuracy: f64,
}

impl ResultRow {
    pub fn b_value(&self) -> f64 {
        self.b_tenths as f64 / 10.0
    }

    fn sort_key(&self) -> (u8, u64, &'static str, &'static str, &'static str) {
        (
            self.b_tenths,
            self.seed,
            self.bound.as_str(),
            self.metric,
            self.transform,
        )
    }
}

/// Mean/stddev of one curve point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub b_tenths: u8,
    pub bound: BoundTag,
    pub metric: &'static str,
    pub transform: &'static str,
    pub mean: f64,
    pub stddev: f64,
    pub runs: usize,
}

/// Sort rows into the canonical order (b, seed, bound, metric, transform).
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn render_results_csv(rows: &[ResultRow]) -> String {
    let mut sorted: Vec<ResultRow> = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = String::from("b,seed,bound,metric,transform,accuracy\n");
    for row in &sorted {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.b_value(),
            row.seed,
            row.bound.as_str(),
            row.metric,
            row.transform,
            row.accuracy
        )
        .expect("string write");
    }
    out
}

/// Aggregate per (b, bound, metric, transform) with the sample stddev.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u8, &'static str, &'static str, &'static str), Vec<f64>> =
        BTreeMap::new();
    let mut bounds: BTreeMap<&'static str, BoundTag> = BTreeMap::new();
    for row in rows {
        bounds.insert(row.bound.as_str(), row.bound);
        groups
            .entry((row.b_tenths, row.bound.as_str(), row.metric, row.transform))
            .or_default()
            .push(row.accuracy);
    }
    groups
        .into_iter()
        .map(|((b_tenths, bound_str, metric, transform), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let stddev = if n > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            SummaryRow {
                b_tenths,
                bound: bounds[bound_str],
                metric,
                transform,
                mean,
                stddev,
                runs: n,
            }
        })
        .collect()
}

pub fn render_summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from("b,bound,metric,transform,mean_accuracy,stddev,runs\n");
    for row in summary {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.b_tenths as f64 / 10.0,
            row.bound.as_str(),
            row.metric,
            row.transform,
            row.mean,
            row.stddev,
            row.runs
        )
        .expect("string write");
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents)
        .map_err(|e| RunError::Output(format!("cannot write {}: {e}", path.display())))
}
