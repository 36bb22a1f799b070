//! Norm routines head to head: power iteration vs Lanczos on dense random
//! matrices, and the DFT path vs Lanczos on the explicit circulant map.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use probprune_core::circulant::{build_full_map, pad_kernel, spectral_norm_via_dft};
use probprune_core::linalg::{spectral_norm, spectral_norm_lanczos, DEFAULT_TOL};
use probprune_core::sampling::{sample_matrix, DistributionSpec};
use probprune_core::{ConvTensor, SeedSpec};

fn dense(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense");
    g.sample_size(10);
    for d in [64usize, 256, 512] {
        let m = sample_matrix(&DistributionSpec::xavier_uniform(1.0), d, d, SeedSpec::new(1, d as u64)).unwrap();
        g.bench_with_input(BenchmarkId::new("power", d), &m, |b, m| {
            b.iter(|| spectral_norm(black_box(m), DEFAULT_TOL).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("lanczos", d), &m, |b, m| {
            b.iter(|| spectral_norm_lanczos(black_box(m), DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

fn conv(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv");
    g.sample_size(10);
    let p = 8;
    for d in [4usize, 16] {
        let dist = DistributionSpec::xavier_uniform(1.0);
        let w = sample_matrix(&dist, d * d, 9, SeedSpec::new(2, d as u64)).unwrap();
        let f = ConvTensor::new(d, d, 3, w.to_row_major()).unwrap();
        let k = pad_kernel(&f, p).unwrap();
        g.bench_with_input(BenchmarkId::new("dft", d), &k, |b, k| {
            b.iter(|| spectral_norm_via_dft(black_box(k)).unwrap())
        });
        let full = build_full_map(&k);
        g.bench_with_input(BenchmarkId::new("explicit-lanczos", d), &full, |b, m| {
            b.iter(|| spectral_norm_lanczos(black_box(m), DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, dense, conv);
criterion_main!(benches);
