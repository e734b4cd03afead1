//! Property tests for the serialization and cost-normalization invariants.

use ndarray::Array2;
use proptest::prelude::*;

use tsdapt_core::data::{read_embeddings_file, write_embeddings_file};
use tsdapt_core::ot::{build_cost_matrix, MetricTag, NormalizationTag};
use tsdapt_core::LabeledEmbeddings;

fn finite_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e12..1e12f64,
        -1.0..1.0f64,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        (-300..300i32).prop_map(|e| 1.5f64 * 10f64.powi(e)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embeddings_file_round_trips_bit_exactly(
        rows in 0usize..12,
        cols in 1usize..6,
        classes in 1usize..5,
        values in proptest::collection::vec(finite_value(), 0..72),
        label_picks in proptest::collection::vec(0usize..64, 0..12),
    ) {
        prop_assume!(values.len() >= rows * cols);
        prop_assume!(label_picks.len() >= rows);
        let embeddings = Array2::from_shape_fn((rows, cols), |(i, j)| values[i * cols + j]);
        let labels: Vec<usize> = (0..rows).map(|i| label_picks[i] % classes).collect();
        let data = LabeledEmbeddings::new(embeddings, labels, classes).unwrap();

        let dir = std::env::temp_dir().join("tsdapt-proptest");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("case-{rows}-{cols}-{classes}.csv"));
        write_embeddings_file(&path, &data).unwrap();
        let back = read_embeddings_file(&path).unwrap();

        prop_assert_eq!(back.class_count, classes);
        prop_assert_eq!(&back.labels, &data.labels);
        for (a, b) in back.embeddings.iter().zip(data.embeddings.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn log_normalizations_never_reorder_costs(
        xs in proptest::collection::vec(-50.0..50.0f64, 2..12),
        xt in proptest::collection::vec(-50.0..50.0f64, 2..12),
    ) {
        let source = Array2::from_shape_vec((xs.len(), 1), xs).unwrap();
        let target = Array2::from_shape_vec((xt.len(), 1), xt).unwrap();
        let raw = build_cost_matrix(&source, &target, MetricTag::SqEuclidean, NormalizationTag::None);
        for norm in [NormalizationTag::Log, NormalizationTag::LogLog] {
            let mapped = build_cost_matrix(&source, &target, MetricTag::SqEuclidean, norm);
            for (a, ma) in raw.entries.iter().zip(mapped.entries.iter()) {
                prop_assert!(ma.is_finite() && *ma >= 0.0);
                for (b, mb) in raw.entries.iter().zip(mapped.entries.iter()) {
                    if a < b {
                        prop_assert!(ma <= mb, "order broken under {norm:?}");
                    }
                }
            }
        }
    }
}
