use probprune_core::networks::compression_ratio;
use probprune_core::pruning::{
    mask_filter_random, mask_magnitude_global, mask_magnitude_layerwise, mask_random_with_replacement,
    mask_random_without_replacement, prune_count,
};
use probprune_core::sampling::{sample_matrix, DistributionSpec};
use probprune_core::{Matrix, SeedSpec};
use proptest::prelude::*;

fn zeros(m: &Matrix) -> usize {
    m.len() - m.count_nonzero()
}

#[test]
fn without_replacement_zeros_exactly_count_and_is_uniform() {
    // Each of the 12 cells of the middle layer should be hit with
    // probability 5/12.
    let dims = [(3, 2), (3, 4), (2, 3)];
    let trials = 6000;
    let mut hits = vec![0usize; 12];
    for t in 0..trials {
        let m = mask_random_without_replacement(&dims, &[0, 5, 0], SeedSpec::new(3, t)).unwrap();
        let mid = m.layers()[1].matrix();
        assert_eq!(zeros(mid), 5);
        for (h, v) in hits.iter_mut().zip(mid.as_col_major()) {
            *h += (*v == 0.0) as usize;
        }
    }
    let p = 5.0 / 12.0;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    for h in hits {
        let f = h as f64 / trials as f64;
        assert!((f - p).abs() < 4.0 * se, "cell frequency {f} vs {p}");
    }
}

#[test]
fn with_replacement_distinct_zero_count_matches_expectation() {
    // m draws into D cells leave D(1 − (1 − 1/D)^m) distinct cells expected.
    let (rows, cols, m) = (8usize, 8usize, 40usize);
    let d = (rows * cols) as f64;
    let want = d * (1.0 - (1.0 - 1.0 / d).powi(m as i32));
    let trials = 4000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for t in 0..trials {
        let mask = mask_random_with_replacement(&[(8, 3), (rows, cols), (2, 8)], &[0, m, 0], SeedSpec::new(4, t))
            .unwrap();
        let z = zeros(mask.layers()[1].matrix()) as f64;
        assert!(z <= m as f64);
        sum += z;
        sum_sq += z * z;
    }
    let n = trials as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).sqrt();
    assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn magnitude_layerwise_keeps_the_largest_entries() {
    let w = vec![
        Matrix::ones(2, 2),
        Matrix::from_rows(&[vec![0.5, -0.1, 3.0], vec![-2.0, 0.05, 0.7]]).unwrap(),
        Matrix::ones(1, 2),
    ];
    let m = mask_magnitude_layerwise(&w, &[0, 3, 0]).unwrap();
    let expect = Matrix::from_rows(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]]).unwrap();
    assert_eq!(m.layers()[1].matrix(), &expect);
}

#[test]
fn global_magnitude_pools_internal_layers() {
    let w = vec![
        Matrix::filled(2, 2, 1e-9),
        Matrix::from_rows(&[vec![0.1, 5.0], vec![4.0, 3.0]]).unwrap(),
        Matrix::from_rows(&[vec![0.2, 0.3], vec![6.0, 7.0]]).unwrap(),
        Matrix::filled(1, 2, 1e-9),
    ];
    let m = mask_magnitude_global(&w, 3).unwrap();
    // 0.1, 0.2 and 0.3 go; the tiny outer layers are never candidates.
    assert_eq!(zeros(m.layers()[0].matrix()), 0);
    assert_eq!(zeros(m.layers()[1].matrix()), 1);
    assert_eq!(zeros(m.layers()[2].matrix()), 2);
    assert_eq!(zeros(m.layers()[3].matrix()), 0);
}

#[test]
fn filter_mask_compression_matches_surviving_filters() {
    let m = mask_filter_random(&[(4, 3), (4, 4), (4, 4)], (10, 64), &[0, 6, 2], SeedSpec::new(8, 0)).unwrap();
    for k in 1..3 {
        let f = m.layers()[k].matrix();
        let kept = f.count_nonzero() as f64 / f.len() as f64;
        assert_eq!(compression_ratio(&m, k).unwrap(), kept);
        let e = m.layers()[k].expand(5);
        assert_eq!(e.count_nonzero() as f64 / e.len() as f64, kept);
    }
}

#[test]
fn prune_count_floors_d_to_one_minus_alpha() {
    assert_eq!(prune_count(0.5, 65_536).unwrap(), 256);
    assert_eq!(prune_count(0.25, 4096).unwrap(), 512);
    assert!(prune_count(1.5, 100).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn magnitude_mask_is_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0, count in 0usize..30) {
        let dist = DistributionSpec::gaussian(1.0);
        let w: Vec<Matrix> = [(6, 4), (5, 6), (3, 5)]
            .iter()
            .enumerate()
            .map(|(k, &(r, c))| sample_matrix(&dist, r, c, SeedSpec::new(seed, k as u64)).unwrap())
            .collect();
        let scaled: Vec<Matrix> = w.iter().map(|m| m.scaled(scale)).collect();
        let a = mask_magnitude_layerwise(&w, &[0, count, 0]).unwrap();
        let b = mask_magnitude_layerwise(&scaled, &[0, count, 0]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn random_masks_are_seed_deterministic(seed in any::<u64>(), count in 0usize..20) {
        let dims = [(4, 4), (5, 4), (3, 5)];
        let a = mask_random_with_replacement(&dims, &[0, count, 0], SeedSpec::new(seed, 1)).unwrap();
        let b = mask_random_with_replacement(&dims, &[0, count, 0], SeedSpec::new(seed, 1)).unwrap();
        prop_assert_eq!(a, b);
    }
}
