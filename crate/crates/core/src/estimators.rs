//! Monte Carlo estimates of the operator-norm constants of uniform random
//! matrices and of the Latala constant, with a pruned variant.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_lanczos, Matrix, DEFAULT_TOL};
use crate::pruning::floor_snapped;
use crate::sampling::{sample_matrix_with, DistributionSpec, SeedSpec};
use crate::theory::{BoundReport, Direction};

pub const DEFAULT_QUANTILES: [f64; 4] = [0.95, 0.99, 0.999, 0.9999];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub q: f64,
    pub c0: f64,
    pub delta0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Row {
    pub n1: usize,
    pub n2: usize,
    pub k: f64,
    pub mean: f64,
    pub std: f64,
    pub quantiles: Vec<QuantileEstimate>,
}

/// `δ₀ = −ln((1−q)/2) / (4 max(n₁, n₂))`, from `1 − 2e^{−4δ₀n} = q`.
pub fn lemma3_delta0(q: f64, n1: usize, n2: usize) -> f64 {
    -((1.0 - q) / 2.0).ln() / (4.0 * n1.max(n2) as f64)
}

/// Order statistic at 1-based index `⌈q·n⌉` of `sorted`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let x = q * n as f64;
    let r = x.round();
    let idx = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() } as usize;
    sorted[idx.clamp(1, n) - 1]
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 trials, got {trials}")));
    }
    Ok(())
}

/// Norms of `trials` xavier-uniform `n₁ x n₂` matrices; trial `t` draws from
/// `seed.child(t)`.
pub fn lemma3_norms(n1: usize, n2: usize, k: f64, trials: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    let dist = DistributionSpec::xavier_uniform(k);
    dist.validate()?;
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.child(t as u64).rng();
            spectral_norm_lanczos(&sample_matrix_with(&dist, n1, n2, &mut rng), DEFAULT_TOL)
        })
        .collect()
}

pub fn estimate_lemma3(n1: usize, n2: usize, k: f64, trials: usize, quantiles: &[f64], seed: SeedSpec) -> Result<Lemma3Row> {
    check_trials(trials)?;
    if quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::InvalidParameter("quantiles must lie in (0, 1)".into()));
    }
    let mut norms = lemma3_norms(n1, n2, k, trials, seed)?;
    let n = trials as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let std = (norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    norms.sort_by(f64::total_cmp);
    let quantiles = quantiles
        .iter()
        .map(|&q| QuantileEstimate {
            q,
            c0: empirical_quantile(&norms, q),
            delta0: lemma3_delta0(q, n1, n2),
        })
        .collect();
    Ok(Lemma3Row {
        n1,
        n2,
        k,
        mean,
        std,
        quantiles,
    })
}

/// Entry distributions of the Latala experiments on `d x d` matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatalaDist {
    /// `U[−√(3/d), √(3/d)]`.
    Uniform,
    /// `N(0, 1/d)`.
    #[serde(rename = "normal-1")]
    Normal1,
    /// `N(0, 3/d)`.
    #[serde(rename = "normal-3")]
    Normal3,
    /// Identically zero.
    Zero,
}

impl LatalaDist {
    pub fn as_str(self) -> &'static str {
        match self {
            LatalaDist::Uniform => "uniform",
            LatalaDist::Normal1 => "normal-1",
            LatalaDist::Normal3 => "normal-3",
            LatalaDist::Zero => "zero",
        }
    }

    fn spec(self, d: usize) -> Option<DistributionSpec> {
        let d = d as f64;
        match self {
            LatalaDist::Uniform => Some(DistributionSpec::xavier_uniform(3f64.sqrt())),
            LatalaDist::Normal1 => Some(DistributionSpec::gaussian(1.0 / d)),
            LatalaDist::Normal3 => Some(DistributionSpec::gaussian(3.0 / d)),
            LatalaDist::Zero => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatalaRow {
    pub d: usize,
    pub dist: LatalaDist,
    pub alpha: Option<f64>,
    /// `max_i (Σ_j E A_ij²)^{1/2}`.
    pub term1: f64,
    /// `max_j (Σ_i E A_ij²)^{1/2}`.
    pub term2: f64,
    /// `(Σ_ij E A_ij⁴)^{1/4}`.
    pub term3: f64,
    pub mean_norm: f64,
    pub c: f64,
}

/// Draws trial `t`'s matrix: entries from `dist`, then (pruned variant)
/// `⌊d^{2−α}⌋` positions picked with replacement and zeroed.
pub fn latala_sample(d: usize, dist: LatalaDist, prune_alpha: Option<f64>, seed: SeedSpec) -> Result<Matrix> {
    let mut rng = seed.rng();
    let mut m = match dist.spec(d) {
        Some(spec) => sample_matrix_with(&spec, d, d, &mut rng),
        None => Matrix::zeros(d, d),
    };
    if let Some(alpha) = prune_alpha {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        let count = floor_snapped((d as f64).powf(2.0 - alpha)) as usize;
        for _ in 0..count {
            let i = rng.random_range(0..d);
            let j = rng.random_range(0..d);
            m.set(i, j, 0.0);
        }
    }
    Ok(m)
}

/// Trials are processed in chunks so per-entry moment sums can be folded in
/// trial order without holding every matrix at once.
const LATALA_CHUNK: usize = 32;

struct LatalaSums {
    terms: [f64; 3],
    mean_norm: f64,
}

fn latala_sums(d: usize, dist: LatalaDist, prune_alpha: Option<f64>, trials: usize, seed: SeedSpec) -> Result<LatalaSums> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    let mut m2 = vec![0.0; d * d];
    let mut m4 = vec![0.0; d * d];
    let mut norm_sum = 0.0;
    for start in (0..trials).step_by(LATALA_CHUNK) {
        let end = (start + LATALA_CHUNK).min(trials);
        let batch: Vec<(f64, Matrix)> = (start..end)
            .into_par_iter()
            .map(|t| {
                let m = latala_sample(d, dist, prune_alpha, seed.child(t as u64))?;
                Ok((spectral_norm_lanczos(&m, DEFAULT_TOL)?, m))
            })
            .collect::<Result<_>>()?;
        for (norm, m) in batch {
            norm_sum += norm;
            for (idx, &x) in m.as_col_major().iter().enumerate() {
                let x2 = x * x;
                m2[idx] += x2;
                m4[idx] += x2 * x2;
            }
        }
    }
    let n = trials as f64;
    // Column-major: entry (i, j) at j*d + i.
    let row_max = (0..d)
        .map(|i| (0..d).map(|j| m2[j * d + i]).sum::<f64>())
        .fold(0.0, f64::max);
    let col_max = (0..d)
        .map(|j| m2[j * d..(j + 1) * d].iter().sum::<f64>())
        .fold(0.0, f64::max);
    let fourth: f64 = m4.iter().sum();
    Ok(LatalaSums {
        terms: [(row_max / n).sqrt(), (col_max / n).sqrt(), (fourth / n).powf(0.25)],
        mean_norm: norm_sum / n,
    })
}

/// Per-entry moments and the mean norm are empirical averages over the
/// trials; `C` is their ratio.
pub fn estimate_latala(d: usize, dist: LatalaDist, prune_alpha: Option<f64>, trials: usize, seed: SeedSpec) -> Result<LatalaRow> {
    check_trials(trials)?;
    if dist == LatalaDist::Zero {
        return Err(Error::InvalidParameter("the Latala ratio is undefined for the zero matrix".into()));
    }
    let s = latala_sums(d, dist, prune_alpha, trials, seed)?;
    let [term1, term2, term3] = s.terms;
    Ok(LatalaRow {
        d,
        dist,
        alpha: prune_alpha,
        term1,
        term2,
        term3,
        mean_norm: s.mean_norm,
        c: s.mean_norm / (term1 + term2 + term3),
    })
}

/// Checks `E‖A‖₂ ≤ cap · (term₁ + term₂ + term₃)` empirically.
pub fn verify_latala_bound(d: usize, dist: LatalaDist, prune_alpha: Option<f64>, trials: usize, seed: SeedSpec, cap: f64) -> Result<BoundReport> {
    check_trials(trials)?;
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!("cap must be positive, got {cap}")));
    }
    let s = latala_sums(d, dist, prune_alpha, trials, seed)?;
    Ok(BoundReport::new(
        format!("latala d={d} {}", dist.as_str()),
        s.mean_norm,
        cap * s.terms.iter().sum::<f64>(),
        Direction::AtMost,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta0_closed_form() {
        let d = lemma3_delta0(0.95, 32, 32);
        assert!((d - (-(0.025f64).ln() / 128.0)).abs() < 1e-15);
        assert_eq!((d * 1000.0).round() / 1000.0, 0.029);
        assert_eq!(lemma3_delta0(0.95, 32, 64), lemma3_delta0(0.95, 64, 64));
    }

    #[test]
    fn quantile_index_is_ceiling() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(empirical_quantile(&xs, 0.95), 950.0);
        assert_eq!(empirical_quantile(&xs, 0.9999), 1000.0);
        assert_eq!(empirical_quantile(&xs, 0.0001), 1.0);
        assert_eq!(empirical_quantile(&xs[..10], 0.95), 10.0);
    }

    #[test]
    fn lemma3_scales_linearly_in_k() {
        let a = estimate_lemma3(8, 5, 1.0, 100, &[0.5], SeedSpec::new(3, 0)).unwrap();
        let b = estimate_lemma3(8, 5, 2.0, 100, &[0.5], SeedSpec::new(3, 0)).unwrap();
        assert!((b.mean - 2.0 * a.mean).abs() < 1e-9 * b.mean);
        assert!(estimate_lemma3(8, 5, 1.0, 99, &[0.5], SeedSpec::new(3, 0)).is_err());
    }

    #[test]
    fn zero_distribution_is_trivially_bounded() {
        let r = verify_latala_bound(6, LatalaDist::Zero, None, 100, SeedSpec::new(0, 0), 1.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.satisfied);
        assert!(estimate_latala(6, LatalaDist::Zero, None, 100, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn pruned_sample_zeros_at_most_the_count() {
        let m = latala_sample(16, LatalaDist::Normal1, Some(0.5), SeedSpec::new(9, 4)).unwrap();
        // ⌊16^{1.5}⌋ = 64 picks with replacement.
        let zeros = 256 - m.count_nonzero();
        assert!(zeros <= 64 && zeros > 40);
    }
}
