//! Residual sweep for the dense decompositions: 1000 seeded random inputs
//! up to 20x20 must reconstruct within 1e-9 of the Frobenius norm.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tsdapt_core::linalg::{svd, sym_eig};

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn thousand_case_reconstruction_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDECAF);
    for case in 0..1000 {
        if case % 2 == 0 {
            let n = rng.random_range(1..21);
            let raw = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() * 2.0 - 1.0);
            let a = (&raw + &raw.t()) * 0.5;
            let (vals, vecs) = sym_eig(&a).expect("eig");
            let mut recon = Array2::<f64>::zeros((n, n));
            for (j, &l) in vals.iter().enumerate() {
                for r in 0..n {
                    for c in 0..n {
                        recon[[r, c]] += l * vecs[[r, j]] * vecs[[c, j]];
                    }
                }
            }
            let norm = frobenius(&a).max(1.0);
            let residual = frobenius(&(&recon - &a));
            assert!(
                residual <= 1e-9 * norm,
                "case {case}: eig residual {residual:.2e} for n={n}"
            );
        } else {
            let m = rng.random_range(1..21);
            let k = rng.random_range(1..21);
            let a = Array2::from_shape_fn((m, k), |_| rng.random::<f64>() * 2.0 - 1.0);
            let (u, s, v) = svd(&a).expect("svd");
            let mut us = u.clone();
            for (j, &sv) in s.iter().enumerate() {
                us.column_mut(j).mapv_inplace(|x| x * sv);
            }
            let recon = us.dot(&v.t());
            let norm = frobenius(&a).max(1.0);
            let residual = frobenius(&(&recon - &a));
            assert!(
                residual <= 1e-9 * norm,
                "case {case}: svd residual {residual:.2e} for {m}x{k}"
            );
            // orthonormal factors
            let gram_u = u.t().dot(&u);
            let gram_v = v.t().dot(&v);
            for gram in [gram_u, gram_v] {
                let n = gram.nrows();
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (gram[[i, j]] - want).abs() <= 1e-9,
                            "case {case}: factor not orthonormal"
                        );
                    }
                }
            }
        }
    }
}
