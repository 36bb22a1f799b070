//! Norm routines against nalgebra's SVD, plus algebraic properties.

use nalgebra::DMatrix;
use probprune_core::linalg::{
    jacobi_singular_values, spectral_norm, spectral_norm_lanczos, unvectorize, vectorize, DEFAULT_TOL,
};
use probprune_core::sampling::{sample_matrix, DistributionSpec};
use probprune_core::{Matrix, SeedSpec};
use proptest::prelude::*;

fn oracle(m: &Matrix) -> f64 {
    let n = DMatrix::from_column_slice(m.rows(), m.cols(), m.as_col_major());
    n.singular_values().max()
}

fn random(rows: usize, cols: usize, stream: u64) -> Matrix {
    sample_matrix(&DistributionSpec::gaussian(1.0), rows, cols, SeedSpec::new(11, stream)).unwrap()
}

#[test]
fn power_and_lanczos_match_svd_on_random_matrices() {
    let shapes = [(1, 1), (1, 7), (7, 1), (5, 5), (20, 13), (13, 20), (64, 64), (150, 90)];
    for (i, &(r, c)) in shapes.iter().enumerate() {
        let m = random(r, c, i as u64);
        let want = oracle(&m);
        let power = spectral_norm(&m, DEFAULT_TOL).unwrap();
        let lanczos = spectral_norm_lanczos(&m, DEFAULT_TOL).unwrap();
        assert!((power - want).abs() <= 1e-7 * want, "power {r}x{c}: {power} vs {want}");
        assert!((lanczos - want).abs() <= 1e-8 * want, "lanczos {r}x{c}: {lanczos} vs {want}");
    }
}

#[test]
fn jacobi_spectrum_matches_svd() {
    let m = random(9, 6, 99);
    let ours = jacobi_singular_values(&m);
    let n = DMatrix::from_column_slice(9, 6, m.as_col_major());
    let mut theirs: Vec<f64> = n.singular_values().iter().copied().collect();
    theirs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(ours.len(), theirs.len());
    for (a, b) in ours.iter().zip(&theirs) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn clustered_top_singular_values() {
    // Gap of 1e-6 between the top two; Lanczos must still land on the larger.
    let m = Matrix::diag(&[1.0, 1.0 - 1e-6, 0.3]);
    let l = spectral_norm_lanczos(&m, DEFAULT_TOL).unwrap();
    assert!((l - 1.0).abs() < 1e-9);
}

fn matrix_strategy(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |d| Matrix::from_col_major(r, c, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_transpose_invariant(m in matrix_strategy(8)) {
        let a = spectral_norm_lanczos(&m, DEFAULT_TOL).unwrap();
        let b = spectral_norm_lanczos(&m.transpose(), DEFAULT_TOL).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
    }

    #[test]
    fn norm_is_submultiplicative(
        (a, b) in (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(r, k, c)| (
            prop::collection::vec(-2.0f64..2.0, r * k).prop_map(move |d| Matrix::from_col_major(r, k, d).unwrap()),
            prop::collection::vec(-2.0f64..2.0, k * c).prop_map(move |d| Matrix::from_col_major(k, c, d).unwrap()),
        ))
    ) {
        let ab = spectral_norm_lanczos(&a.matmul(&b).unwrap(), DEFAULT_TOL).unwrap();
        let na = spectral_norm_lanczos(&a, DEFAULT_TOL).unwrap();
        let nb = spectral_norm_lanczos(&b, DEFAULT_TOL).unwrap();
        prop_assert!(ab <= na * nb * (1.0 + 1e-8) + 1e-12);
    }

    #[test]
    fn norm_sits_between_max_entry_and_frobenius(m in matrix_strategy(8)) {
        let n = spectral_norm_lanczos(&m, DEFAULT_TOL).unwrap();
        prop_assert!(n >= m.max_abs() * (1.0 - 1e-9));
        prop_assert!(n <= m.frobenius() * (1.0 + 1e-9));
    }

    #[test]
    fn vec_round_trip(m in matrix_strategy(10)) {
        let v = vectorize(&m);
        prop_assert_eq!(v.dim(), m.len());
        let back = unvectorize(&v, m.rows(), m.cols()).unwrap();
        prop_assert_eq!(back, m);
    }
}
