//! Experiment drivers: the synthetic noise sweep and file-based adaptation
//! runs.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use tsdapt_core::data::{
    extract_embeddings, generate_sinusoidal, read_embeddings_file, Domain, SinusoidConfig, Split,
};
use tsdapt_core::pipeline::{
    evaluate, fit_class_transforms, fit_classifier, BoundTag, PipelineError,
};
use tsdapt_core::LabeledEmbeddings;

use crate::config::{transform_name, ExperimentConfig};
use crate::report::{
    render_results_csv, render_summary_csv, sort_rows, summarize, write_file, ResultRow,
};
use crate::svg::render_accuracy_plot;
use crate::RunError;

/// Deterministic per-split seed derivation from the run seed.
fn mix(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(salt)
}

fn pipeline_to_run(e: PipelineError) -> RunError {
    match e {
        PipelineError::MissingTargetClass(_)
        | PipelineError::EmptyClass(_)
        | PipelineError::MissingTransform(_) => RunError::Input(e.to_string()),
        PipelineError::Linalg(_) | PipelineError::Ot(_) => RunError::Numerical(e.to_string()),
    }
}

/// Accuracies for one (b, seed) grid point, one row per configured bound.
pub fn run_sweep_point(
    cfg: &ExperimentConfig,
    b_tenths: u8,
    seed: u64,
) -> Result<Vec<ResultRow>, RunError> {
    let b = b_tenths as f64 / 10.0;
    let gen = |domain, split, per_class, salt| -> Result<LabeledEmbeddings, RunError> {
        extract_embeddings(&generate_sinusoidal(&SinusoidConfig {
            noise_b: b,
            domain,
            split,
            samples_per_class: per_class,
            seed: mix(seed, salt),
        }))
        .map_err(|e| RunError::Numerical(e.to_string()))
    };
    let target = gen(Domain::Target, Split::Train, cfg.train_per_class, 1)?;
    let adapt = gen(Domain::Source, Split::Adapt, cfg.adapt_per_class, 2)?;
    let val = gen(Domain::Source, Split::Val, cfg.val_per_class, 3)?;

    let transforms = fit_class_transforms(&target, &adapt, cfg.transform, &cfg.ot_params)
        .map_err(pipeline_to_run)?;
    let classifier = fit_classifier(&target, cfg.classifier, seed).map_err(pipeline_to_run)?;
    let metric = cfg.metric.materialize(&target, seed);
    let mut rows = Vec::with_capacity(cfg.bounds.len());
    for &bound in &cfg.bounds {
        let report = evaluate(&val, &transforms, &target, &metric, &classifier, bound)
            .map_err(pipeline_to_run)?;
        rows.push(ResultRow {
            b_tenths,
            seed,
            bound,
            metric: cfg.metric.name(),
            transform: transform_name(cfg.transform),
            accuracy: report.accuracy,
        });
    }
    Ok(rows)
}

pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub results_csv: String,
}

/// Run the configured (b, seed) grid, write `results.csv`, `summary.csv`,
/// and `accuracy_vs_noise.svg` into `out_dir`.
///
/// Grid points run in parallel (capped by the `TSDAPT_THREADS` environment
/// variable); outputs are sorted afterwards, so completion order never
/// changes the bytes. On a numerical failure the rows that did complete are
/// still flushed before the error is returned.
pub fn run_synthetic_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepOutput, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Output(format!("cannot create {}: {e}", out_dir.display())))?;
    let points: Vec<(u8, u64)> = cfg
        .b_grid
        .iter()
        .flat_map(|&b| cfg.seeds.iter().map(move |&s| (b, s)))
        .collect();
    let pool = thread_pool()?;
    let outcomes: Vec<Result<Vec<ResultRow>, RunError>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(b, seed)| run_sweep_point(cfg, b, seed))
            .collect()
    });
    let mut rows = Vec::with_capacity(points.len() * cfg.bounds.len());
    let mut failure: Option<RunError> = None;
    for outcome in outcomes {
        match outcome {
            Ok(mut point_rows) => rows.append(&mut point_rows),
            Err(e) => failure = Some(failure.unwrap_or(e)),
        }
    }
    sort_rows(&mut rows);
    let results_csv = render_results_csv(&rows);
    write_file(&out_dir.join("results.csv"), &results_csv)?;
    let summary = summarize(&rows);
    write_file(&out_dir.join("summary.csv"), &render_summary_csv(&summary))?;
    write_file(
        &out_dir.join("accuracy_vs_noise.svg"),
        &render_accuracy_plot(&summary),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(SweepOutput { rows, results_csv }),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("TSDAPT_THREADS") {
        let threads: usize = value.parse().map_err(|_| {
            RunError::Config(format!("TSDAPT_THREADS must be a positive integer, got {value:?}"))
        })?;
        if threads == 0 {
            return Err(RunError::Config(
                "TSDAPT_THREADS must be a positive integer".into(),
            ));
        }
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| RunError::Config(format!("cannot build thread pool: {e}")))
}

/// One adaptation run over externally supplied embedding files; writes
/// `report.csv`, `per_class.csv`, and `confusion.csv` and logs per-phase
/// runtimes to stdout.
pub fn run_from_files(
    cfg: &ExperimentConfig,
    target_path: &Path,
    adapt_path: &Path,
    val_path: &Path,
    out_dir: &Path,
    seed: u64,
) -> Result<Vec<ResultRow>, RunError> {
    cfg.validate()?;
    let read = |path: &Path| -> Result<LabeledEmbeddings, RunError> {
        read_embeddings_file(path)
            .map_err(|e| RunError::Input(format!("{}: {e}", path.display())))
    };
    let target = read(target_path)?;
    let adapt = read(adapt_path)?;
    let val = read(val_path)?;
    for (name, split) in [("adaptation", &adapt), ("validation", &val)] {
        if split.dim() != target.dim() {
            return Err(RunError::Input(format!(
                "{name} dimension {} does not match target dimension {}",
                split.dim(),
                target.dim()
            )));
        }
        if split.class_count != target.class_count {
            return Err(RunError::Input(format!(
                "{name} class count {} does not match target class count {}",
                split.class_count, target.class_count
            )));
        }
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Output(format!("cannot create {}: {e}", out_dir.display())))?;

    let fit_start = Instant::now();
    let transforms = fit_class_transforms(&target, &adapt, cfg.transform, &cfg.ot_params)
        .map_err(pipeline_to_run)?;
    let classifier = fit_classifier(&target, cfg.classifier, seed).map_err(pipeline_to_run)?;
    let fit_time = fit_start.elapsed().as_secs_f64();
    let metric = cfg.metric.materialize(&target, seed);

    let mut rows = Vec::new();
    let mut per_class = String::from("bound,class,accuracy,count\n");
    let mut confusion = String::from("bound,true_class,predicted_class,count\n");
    let mut select_time = 0.0f64;
    let mut classify_time = 0.0f64;
    for &bound in &cfg.bounds {
        let start = Instant::now();
        let report = evaluate(&val, &transforms, &target, &metric, &classifier, bound)
            .map_err(pipeline_to_run)?;
        let elapsed = start.elapsed().as_secs_f64();
        match bound {
            BoundTag::Selected => select_time += elapsed,
            _ => classify_time += elapsed,
        }
        rows.push(ResultRow {
            b_tenths: 0,
            seed,
            bound,
            metric: cfg.metric.name(),
            transform: transform_name(cfg.transform),
            accuracy: report.accuracy,
        });
        for (class, &acc) in report.per_class_accuracy.iter().enumerate() {
            let count: usize = report.confusion.row(class).sum();
            per_class.push_str(&format!("{},{class},{acc},{count}\n", bound.as_str()));
        }
        for truth in 0..target.class_count {
            for predicted in 0..target.class_count {
                confusion.push_str(&format!(
                    "{},{truth},{predicted},{}\n",
                    bound.as_str(),
                    report.confusion[[truth, predicted]]
                ));
            }
        }
    }
    let mut report_csv = String::from("bound,metric,transform,accuracy\n");
    for row in &rows {
        report_csv.push_str(&format!(
            "{},{},{},{}\n",
            row.bound.as_str(),
            row.metric,
            row.transform,
            row.accuracy
        ));
    }
    write_file(&out_dir.join("report.csv"), &report_csv)?;
    write_file(&out_dir.join("per_class.csv"), &per_class)?;
    write_file(&out_dir.join("confusion.csv"), &confusion)?;
    println!(
        "runtime_seconds fit={fit_time:.6} select={select_time:.6} classify={classify_time:.6}"
    );
    Ok(rows)
}
