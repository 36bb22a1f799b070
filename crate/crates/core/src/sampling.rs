//! Seeded random streams, weight distributions and evaluation-domain samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Identifies one reproducible random stream.
///
/// The base seed keys a ChaCha8 generator and the stream index selects one
/// of its 2⁶⁴ independent streams, so `(base_seed, stream_index)` maps
/// injectively to generator state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            base_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.base_seed;
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }

    /// A seed for sub-stream `index` of this stream. The parent pair is folded
    /// into a fresh base seed so children of distinct parents never collide
    /// with each other or with top-level streams of the same base.
    pub fn child(&self, index: u64) -> SeedSpec {
        let folded = mix64(self.base_seed ^ mix64(self.stream_index.wrapping_add(0xD1B5_4A32_D192_ED03)));
        SeedSpec::new(folded, index)
    }
}

/// SplitMix64 finalizer; a bijection on u64.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    UniformSymmetric,
    GaussianZeroMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum ScaleRule {
    /// Half-width `K / sqrt(max(rows, cols))` for the uniform kind; the
    /// Gaussian kind uses the matching variance `K² / (3 max(rows, cols))`.
    XavierUniform(f64),
    /// Absolute per-entry variance.
    Variance(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistKind,
    pub scale: ScaleRule,
}

impl DistributionSpec {
    pub fn xavier_uniform(k: f64) -> Self {
        DistributionSpec {
            kind: DistKind::UniformSymmetric,
            scale: ScaleRule::XavierUniform(k),
        }
    }

    pub fn uniform_variance(v: f64) -> Self {
        DistributionSpec {
            kind: DistKind::UniformSymmetric,
            scale: ScaleRule::Variance(v),
        }
    }

    pub fn gaussian(variance: f64) -> Self {
        DistributionSpec {
            kind: DistKind::GaussianZeroMean,
            scale: ScaleRule::Variance(variance),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = match self.scale {
            ScaleRule::XavierUniform(k) => k,
            ScaleRule::Variance(v) => v,
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "distribution parameter must be positive and finite, got {p}"
            )));
        }
        Ok(())
    }

    /// Per-entry variance for an entry of a `rows x cols` matrix.
    pub fn variance(&self, rows: usize, cols: usize) -> f64 {
        match self.scale {
            ScaleRule::XavierUniform(k) => k * k / (3.0 * rows.max(cols) as f64),
            ScaleRule::Variance(v) => v,
        }
    }

    /// Exact `E X⁴` for an entry of a `rows x cols` matrix.
    pub fn fourth_moment(&self, rows: usize, cols: usize) -> f64 {
        let v = self.variance(rows, cols);
        match self.kind {
            // a⁴/5 with a² = 3v
            DistKind::UniformSymmetric => 9.0 * v * v / 5.0,
            DistKind::GaussianZeroMean => 3.0 * v * v,
        }
    }

    /// Draws one entry of a `rows x cols` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, rows: usize, cols: usize, rng: &mut R) -> f64 {
        let v = self.variance(rows, cols);
        match self.kind {
            DistKind::UniformSymmetric => {
                let half = (3.0 * v).sqrt();
                half * (2.0 * rng.random::<f64>() - 1.0)
            }
            DistKind::GaussianZeroMean => v.sqrt() * standard_normal(rng),
        }
    }
}

/// Marsaglia polar method on the uniform stream. The paired variate is
/// discarded so every call consumes a self-contained run of draws.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// I.i.d. matrix, entries drawn in column-major order.
pub fn sample_matrix(dist: &DistributionSpec, rows: usize, cols: usize, seed: SeedSpec) -> Result<Matrix> {
    dist.validate()?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
    }
    let mut rng = seed.rng();
    Ok(sample_matrix_with(dist, rows, cols, &mut rng))
}

pub(crate) fn sample_matrix_with<R: Rng + ?Sized>(dist: &DistributionSpec, rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| dist.sample(rows, cols, rng)).collect();
    Matrix::from_col_major(rows, cols, data).expect("sampled entries are finite")
}

/// Uniform points on the unit sphere `S^{dim-1}` by normalizing Gaussians.
pub fn sample_unit_sphere(dim: usize, n: usize, seed: SeedSpec) -> Result<Vec<Vector>> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidParameter("dim and n must be positive".into()));
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut x: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        out.push(Vector::from_vec_unchecked(x));
    }
    Ok(out)
}

/// Uniform points in the unit cube `[0,1]^dim`.
pub fn sample_unit_cube(dim: usize, n: usize, seed: SeedSpec) -> Result<Vec<Vector>> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidParameter("dim and n must be positive".into()));
    }
    let mut rng = seed.rng();
    Ok((0..n)
        .map(|_| Vector::from_vec_unchecked((0..dim).map(|_| rng.random::<f64>()).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::l2_norm;

    #[test]
    fn xavier_support_bound() {
        let m = sample_matrix(&DistributionSpec::xavier_uniform(1.0), 32, 32, SeedSpec::new(1, 0)).unwrap();
        let bound = 1.0 / 32f64.sqrt();
        assert!(m.as_col_major().iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let d = DistributionSpec::gaussian(0.5);
        let a = sample_matrix(&d, 7, 5, SeedSpec::new(42, 3)).unwrap();
        let b = sample_matrix(&d, 7, 5, SeedSpec::new(42, 3)).unwrap();
        assert_eq!(a.as_col_major(), b.as_col_major());
        let c = sample_matrix(&d, 7, 5, SeedSpec::new(42, 4)).unwrap();
        assert_ne!(a.as_col_major(), c.as_col_major());
    }

    #[test]
    fn xavier_second_moment_512() {
        // Var of U[-a, a] is a²/3 with a² = 1/512.
        let m = sample_matrix(&DistributionSpec::xavier_uniform(1.0), 512, 512, SeedSpec::new(7, 0)).unwrap();
        let mean_sq = m.as_col_major().iter().map(|x| x * x).sum::<f64>() / m.len() as f64;
        let expected = (1.0 / 512.0) / 3.0;
        assert!((mean_sq - expected).abs() / expected < 0.05, "{mean_sq} vs {expected}");
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(sample_matrix(&DistributionSpec::gaussian(0.0), 2, 2, SeedSpec::new(0, 0)).is_err());
        assert!(sample_matrix(&DistributionSpec::xavier_uniform(-1.0), 2, 2, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn sphere_dim_one_is_sign() {
        for x in sample_unit_sphere(1, 200, SeedSpec::new(3, 0)).unwrap() {
            assert_eq!(x.as_slice()[0].abs(), 1.0);
        }
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        for x in sample_unit_sphere(17, 500, SeedSpec::new(5, 1)).unwrap() {
            assert!((l2_norm(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_coordinate_means_near_zero() {
        let pts = sample_unit_sphere(3, 100_000, SeedSpec::new(11, 0)).unwrap();
        for c in 0..3 {
            let mean = pts.iter().map(|x| x.as_slice()[c]).sum::<f64>() / pts.len() as f64;
            assert!(mean.abs() < 0.02, "coordinate {c} mean {mean}");
        }
    }

    #[test]
    fn cube_support_mean_and_reproducibility() {
        let pts = sample_unit_cube(2, 100_000, SeedSpec::new(13, 0)).unwrap();
        assert!(pts.iter().flat_map(|x| x.as_slice()).all(|&v| (0.0..=1.0).contains(&v)));
        for c in 0..2 {
            let mean = pts.iter().map(|x| x.as_slice()[c]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.01);
        }
        let again = sample_unit_cube(2, 100_000, SeedSpec::new(13, 0)).unwrap();
        assert_eq!(pts, again);
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let draw = |s: u64| -> Vec<f64> {
            let mut rng = SeedSpec::new(99, s).rng();
            (0..10_000).map(|_| rng.random::<f64>()).collect()
        };
        let (a, b) = (draw(0), draw(1));
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!((cov / (va * vb).sqrt()).abs() < 0.05);
    }

    #[test]
    fn child_seeds_differ_from_parent_streams() {
        let parent = SeedSpec::new(5, 2);
        assert_ne!(parent.child(0), SeedSpec::new(5, 0));
        assert_ne!(parent.child(0), SeedSpec::new(5, 3).child(0));
    }

    #[test]
    fn xavier_moments_match_exact_factors() {
        // E X² = K²/(3n), E X⁴ = K⁴/(5n²) within 10% at 10⁵ entries.
        let (rows, cols, k) = (256, 400, 1.5);
        let m = sample_matrix(&DistributionSpec::xavier_uniform(k), rows, cols, SeedSpec::new(21, 0)).unwrap();
        let n = 400.0;
        let m2 = m.as_col_major().iter().map(|x| x.powi(2)).sum::<f64>() / m.len() as f64;
        let m4 = m.as_col_major().iter().map(|x| x.powi(4)).sum::<f64>() / m.len() as f64;
        assert!((m2 / (k * k / (3.0 * n)) - 1.0).abs() < 0.1);
        assert!((m4 / (k.powi(4) / (5.0 * n * n)) - 1.0).abs() < 0.1);
    }
}
