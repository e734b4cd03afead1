//! Shared fixtures for the criterion benchmarks: seeded embedding clouds
//! shaped like the per-class adaptation problems (50 source rows onto 100
//! target rows, 50 dimensions).

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const SOURCE_ROWS: usize = 50;
pub const TARGET_ROWS: usize = 100;
pub const DIM: usize = 50;

pub fn source_cloud(seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((SOURCE_ROWS, DIM), |_| rng.random::<f64>() - 1.5)
}

pub fn target_cloud(seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(101));
    Array2::from_shape_fn((TARGET_ROWS, DIM), |_| rng.random::<f64>() + 0.5)
}

pub fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}
