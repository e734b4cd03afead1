//! Transformation-computation runtimes: the exact, entropic, and
//! regularized solvers plus the closed-form CORAL fit on one per-class
//! problem (50 source rows onto 100 target rows, 50 dimensions).

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tsdapt_bench::{source_cloud, target_cloud, uniform, SOURCE_ROWS, TARGET_ROWS};
use tsdapt_core::coral::coral_fit;
use tsdapt_core::ot::{
    build_cost_matrix, solve_emd, solve_emd_laplacian, solve_sinkhorn, solve_sinkhorn_class_reg,
    ClassRegVariant, MetricTag, NormalizationTag,
};

fn transform_fits(c: &mut Criterion) {
    let xs = source_cloud(7);
    let xt = target_cloud(7);
    let cost = build_cost_matrix(&xs, &xt, MetricTag::SqEuclidean, NormalizationTag::LogLog);
    let a = uniform(SOURCE_ROWS);
    let b = uniform(TARGET_ROWS);
    let labels = vec![0usize; SOURCE_ROWS];

    let mut group = c.benchmark_group("transform_fit");
    group.sample_size(20);
    group.bench_function("emd", |bench| {
        bench.iter(|| black_box(solve_emd(&a, &b, &cost).unwrap()))
    });
    group.bench_function("sinkhorn", |bench| {
        bench.iter(|| black_box(solve_sinkhorn(&a, &b, &cost, 0.1, 10_000, 1e-6).unwrap()))
    });
    group.bench_function("semd", |bench| {
        bench.iter(|| {
            black_box(solve_emd_laplacian(&a, &b, &cost, &xs, &xt, 1.0, 20).unwrap())
        })
    });
    group.bench_function("sinkhorn_lpl1", |bench| {
        bench.iter(|| {
            black_box(
                solve_sinkhorn_class_reg(
                    &a,
                    &b,
                    &cost,
                    &labels,
                    ClassRegVariant::LpL1,
                    0.1,
                    0.5,
                    10,
                    10_000,
                    1e-6,
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("sinkhorn_l1l2", |bench| {
        bench.iter(|| {
            black_box(
                solve_sinkhorn_class_reg(
                    &a,
                    &b,
                    &cost,
                    &labels,
                    ClassRegVariant::L1L2,
                    0.1,
                    0.5,
                    10,
                    10_000,
                    1e-6,
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("coral", |bench| {
        bench.iter(|| black_box(coral_fit(&xs, &xt, 1e-6).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, transform_fits);
criterion_main!(benches);
