//! Closed forms and bound calculators: order-statistic moments of squared
//! uniforms, Chernoff and balls-into-bins tails, width lower bounds, the
//! admissible-α constraints and the CNN right-hand side and probability.
//!
//! `log` is the natural logarithm throughout.

use num_rational::Ratio;
use num_traits::CheckedMul;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Satisfied when `lhs ≤ rhs`.
    AtMost,
    /// Satisfied when `lhs ≥ rhs`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub direction: Direction,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, direction: Direction) -> Self {
        let satisfied = match direction {
            Direction::AtMost => lhs <= rhs,
            Direction::AtLeast => lhs >= rhs,
        };
        BoundReport {
            name: name.into(),
            satisfied,
            lhs,
            rhs,
            direction,
        }
    }
}

/// Constants appearing in the width bounds and probabilities. Which fields a
/// calculator reads is stated on the calculator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConstants {
    /// Operator-norm bound of the normalized uniform matrix.
    pub c0: f64,
    /// Tail exponent paired with `c0`.
    pub delta0: f64,
    /// Universal constant of the Latala bound.
    pub c1: f64,
    /// Derived constant `c2`.
    pub c2: f64,
    /// `N_1, …, N_l`: high-probability bounds on `‖W_k*‖₂`.
    #[serde(default)]
    pub norm_bounds: Vec<f64>,
    /// `δ_1, …, δ_l`: failure probabilities of those bounds.
    #[serde(default)]
    pub norm_deltas: Vec<f64>,
    /// Uniform half-width scale.
    pub k: f64,
    /// Second- and fourth-moment scales.
    pub k1: f64,
    pub k2: f64,
}

impl TheoremConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c0", self.c0),
            ("delta0", self.delta0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("k", self.k),
            ("k1", self.k1),
            ("k2", self.k2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.norm_bounds.iter().any(|&n| !(n >= 1.0 && n.is_finite())) {
            return Err(Error::InvalidParameter("norm bounds must be finite and at least 1".into()));
        }
        if self.norm_deltas.iter().any(|&d| !(0.0..=1.0).contains(&d)) {
            return Err(Error::InvalidParameter("norm deltas must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `c1 (2√(3K₁) + K₂^{1/4})`.
    pub fn random_scheme_c2(c1: f64, k1: f64, k2: f64) -> f64 {
        c1 * (2.0 * (3.0 * k1).sqrt() + k2.powf(0.25))
    }

    /// `C K (2√2 + 24^{1/4})`, the magnitude-scheme counterpart.
    pub fn magnitude_scheme_c2(c: f64, k: f64) -> f64 {
        c * k * (2.0 * 2f64.sqrt() + 24f64.powf(0.25))
    }
}

// ---- order statistics ----

/// `(r+2p−1)! n! / ((r−1)! (n+2p)!)` exactly, as a telescoping product.
pub fn order_stat_ratio(n: u64, r: u64, p: u32) -> Result<Ratio<u128>> {
    if r == 0 || r > n || p == 0 {
        return Err(Error::InvalidParameter(format!("need 1 <= r <= n and p >= 1, got n={n}, r={r}, p={p}")));
    }
    let mut acc = Ratio::from_integer(1u128);
    for i in 0..2 * p as u64 {
        let step = Ratio::new((r + i) as u128, (n + i + 1) as u128);
        acc = acc
            .checked_mul(&step)
            .ok_or_else(|| Error::InvalidParameter("order statistic ratio overflows u128".into()))?;
    }
    Ok(acc)
}

/// `E X_(r)^p` for the `r`-th smallest of `n` squared `U[−a, a]` samples.
pub fn order_stat_moment(a: f64, n: u64, r: u64, p: u32) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
    }
    let ratio = order_stat_ratio(n, r, p)?;
    Ok(a.powi(2 * p as i32) * (*ratio.numer() as f64 / *ratio.denom() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl MonteCarloEstimate {
    fn from_sums(sum: f64, sum_sq: f64, trials: usize) -> Self {
        let n = trials as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        MonteCarloEstimate {
            mean,
            std_err: (var / n).sqrt(),
            trials,
        }
    }

    /// `|mean − target| ≤ k · std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Trials are cut into fixed blocks, each on its own child stream, so the
/// result does not depend on how many threads run them.
const MC_BLOCK: usize = 1000;

fn blocked_sums(trials: usize, seed: SeedSpec, f: impl Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync) -> (f64, f64) {
    let blocks = trials.div_ceil(MC_BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b as u64).rng();
            let len = MC_BLOCK.min(trials - b * MC_BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let x = f(&mut rng);
                s += x;
                s2 += x * x;
            }
            (s, s2)
        })
        .collect();
    sums.into_iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
}

/// Monte Carlo estimate of [`order_stat_moment`].
pub fn order_stat_monte_carlo(a: f64, n: usize, r: usize, p: u32, trials: usize, seed: SeedSpec) -> Result<MonteCarloEstimate> {
    if r == 0 || r > n || p == 0 || trials < 2 {
        return Err(Error::InvalidParameter("need 1 <= r <= n, p >= 1, trials >= 2".into()));
    }
    let (s, s2) = blocked_sums(trials, seed, |rng| {
        let mut xs: Vec<f64> = (0..n)
            .map(|_| {
                let u = a * (2.0 * rng.random::<f64>() - 1.0);
                u * u
            })
            .collect();
        let (_, x, _) = xs.select_nth_unstable_by(r - 1, f64::total_cmp);
        x.powi(p as i32)
    });
    Ok(MonteCarloEstimate::from_sums(s, s2, trials))
}

// ---- tails ----

/// `exp(−δ²μ / (1+δ))`.
pub fn chernoff_upper(mu: f64, delta: f64) -> Result<f64> {
    if !(mu > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("mu and delta must be positive, got {mu}, {delta}")));
    }
    Ok((-delta * delta * mu / (1.0 + delta)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallsBinsReport {
    pub bins: usize,
    pub balls: usize,
    pub trials: usize,
    /// Fraction of trials whose fullest bin holds at most `3N/n` balls.
    pub empirical: f64,
    pub std_err: f64,
    /// Whether `N ≥ n log n`, the regime of the guarantee.
    pub guarantee_applies: bool,
    /// `1 − n^{−1/3}`.
    pub guarantee: f64,
    /// `empirical ≥ guarantee − 3σ̂`; `None` outside the regime.
    pub guarantee_holds: Option<bool>,
}

fn max_load_ok(loads: &[u32], balls: usize) -> bool {
    let n = loads.len();
    let max = loads.iter().copied().max().unwrap_or(0) as usize;
    // max ≤ 3N/n, compared in integers.
    max * n <= 3 * balls
}

/// Throws `balls` balls into `bins` bins `trials` times.
pub fn balls_in_bins_check(bins: usize, balls: usize, trials: usize, seed: SeedSpec) -> Result<BallsBinsReport> {
    if bins == 0 || trials < 2 {
        return Err(Error::InvalidParameter("need at least one bin and two trials".into()));
    }
    let (hits, _) = blocked_sums(trials, seed, |rng| {
        let mut loads = vec![0u32; bins];
        for _ in 0..balls {
            loads[rng.random_range(0..bins)] += 1;
        }
        if max_load_ok(&loads, balls) {
            1.0
        } else {
            0.0
        }
    });
    let p = hits / trials as f64;
    let std_err = (p * (1.0 - p) / trials as f64).sqrt();
    let applies = balls as f64 >= bins as f64 * (bins as f64).ln();
    let guarantee = 1.0 - (bins as f64).powf(-1.0 / 3.0);
    Ok(BallsBinsReport {
        bins,
        balls,
        trials,
        empirical: p,
        std_err,
        guarantee_applies: applies,
        guarantee,
        guarantee_holds: applies.then_some(p >= guarantee - 3.0 * std_err),
    })
}

/// `P(max load ≤ 3N/n)` by enumerating all `n^N` assignments, as
/// `(favorable, total)`. Requires `n^N ≤ 10⁶`.
pub fn balls_in_bins_exact(bins: usize, balls: usize) -> Result<(u64, u64)> {
    if bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let total = (bins as u64)
        .checked_pow(balls as u32)
        .filter(|&t| t <= 1_000_000)
        .ok_or_else(|| Error::InvalidParameter(format!("{bins}^{balls} assignments is too many to enumerate")))?;
    let mut favorable = 0;
    let mut loads = vec![0u32; bins];
    for code in 0..total {
        loads.iter_mut().for_each(|x| *x = 0);
        let mut c = code;
        for _ in 0..balls {
            loads[(c % bins as u64) as usize] += 1;
            c /= bins as u64;
        }
        if max_load_ok(&loads, balls) {
            favorable += 1;
        }
    }
    Ok((favorable, total))
}

// ---- width bounds ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthBound {
    /// The individual lower bounds on `d`, in the order they are stated.
    pub terms: Vec<f64>,
    /// Ceiling of their maximum.
    pub bound: u64,
}

/// `⌈x⌉`, snapping values within rounding noise of an integer to it.
fn ceil_snapped(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

fn check_common(l: usize, lipschitz: &[f64], alpha: f64, eps: f64, delta: f64, alpha_max: f64) -> Result<()> {
    if l < 3 {
        return Err(Error::InvalidParameter(format!("depth must be at least 3, got {l}")));
    }
    if lipschitz.len() != l - 1 || lipschitz.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter(format!("need {} positive Lipschitz constants", l - 1)));
    }
    if !(alpha > 0.0 && alpha < alpha_max) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, {alpha_max}), got {alpha}")));
    }
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter("eps and delta must be positive".into()));
    }
    Ok(())
}

/// Width lower bound for magnitude pruning:
/// `max{C₁^{1/α}, (C₂/ε)^{1/α}, (C₃/δ)^{1/α}, (log(1/δ) + log(l²−2)) / (4δ₀)}`
/// with `C₁ = 1/c₀`, `C₂ = (2^{l−2} − 1) L₁⋯L_{l−1} c₀^{l−1}`,
/// `C₃ = (l² − 2) c₂`. Reads `c0`, `c2`, `delta0`.
pub fn thm1_width_bound(
    consts: &TheoremConstants,
    l: usize,
    lipschitz: &[f64],
    alpha: f64,
    eps: f64,
    delta: f64,
) -> Result<WidthBound> {
    check_common(l, lipschitz, alpha, eps, delta, 1.0)?;
    let lf = l as f64;
    let lip: f64 = lipschitz.iter().product();
    let c1 = 1.0 / consts.c0;
    let c2 = (2f64.powi(l as i32 - 2) - 1.0) * lip * consts.c0.powi(l as i32 - 1);
    let c3 = (lf * lf - 2.0) * consts.c2;
    let inv = 1.0 / alpha;
    let terms = vec![
        c1.powf(inv),
        (c2 / eps).powf(inv),
        (c3 / delta).powf(inv),
        ((1.0 / delta).ln() + (lf * lf - 2.0).ln()) / (4.0 * consts.delta0),
    ];
    let bound = ceil_snapped(terms.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Ok(WidthBound { terms, bound })
}

/// `δ − [δ_l + Σ_{i<l} (l−i) δ_i]`.
pub fn thm2_delta0(delta: f64, norm_deltas: &[f64]) -> f64 {
    let l = norm_deltas.len();
    let weighted: f64 = norm_deltas[..l - 1].iter().enumerate().map(|(i, d)| (l - 1 - i) as f64 * d).sum();
    delta - norm_deltas[l - 1] - weighted
}

/// Width lower bound for random pruning:
/// `max{C₁^{4/α}, (C₂/ε)^{4/α}, (C₃/δ₀)³, (C₄/δ₀)^{4/α}}` with
/// `C₁ = max_k 1/N_k` over internal layers, `C₂ = (2^{l−2} − 1) L₁⋯L_{l−1} N₁⋯N_l`,
/// `C₃ = 3(l−2)`, `C₄ = 3c₂(l−2)`. Reads `c2`, `norm_bounds`, `norm_deltas`.
pub fn thm2_width_bound(
    consts: &TheoremConstants,
    l: usize,
    lipschitz: &[f64],
    alpha: f64,
    eps: f64,
    delta: f64,
) -> Result<WidthBound> {
    check_common(l, lipschitz, alpha, eps, delta, 1.0)?;
    if consts.norm_bounds.len() != l || consts.norm_deltas.len() != l {
        return Err(Error::InvalidParameter(format!("need {l} norm bounds and {l} norm deltas")));
    }
    let delta0 = thm2_delta0(delta, &consts.norm_deltas);
    if !(delta0 > 0.0) {
        return Err(Error::InvalidParameter(format!("delta0 = {delta0} must be positive")));
    }
    let lf = l as f64;
    let lip: f64 = lipschitz.iter().product();
    let c1 = consts.norm_bounds[1..l - 1].iter().map(|n| 1.0 / n).fold(0.0, f64::max);
    let c2 = (2f64.powi(l as i32 - 2) - 1.0) * lip * consts.norm_bounds.iter().product::<f64>();
    let c3 = 3.0 * (lf - 2.0);
    let c4 = 3.0 * consts.c2 * (lf - 2.0);
    let e = 4.0 / alpha;
    let terms = vec![c1.powf(e), (c2 / eps).powf(e), (c3 / delta0).powi(3), (c4 / delta0).powf(e)];
    let bound = ceil_snapped(terms.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Ok(WidthBound { terms, bound })
}

// ---- admissible alpha ----

fn check_width(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("width {d} is below 3")));
    }
    Ok(d as f64)
}

/// The two printed constraints for random pruning, for each consecutive
/// pair `(d_k, d_{k+1})` of `d_1, …, d_{l−1}`:
///
/// `α ≤ 1 − (log(d_{k+1}+1) − log log d_{k+1}) / (log d_{k+1} + log d_k)` and
/// the same with `d_k` in the numerator. Each report has `lhs` the largest
/// admissible α and `rhs` 1 (so they are always "satisfied"); use
/// [`thm2_max_alpha`] for the overall limit.
///
/// Note the minus sign before `log log`, kept as printed. The proof only
/// needs `⌊D_k^{1−α}⌋ ≥ d_k log d_k`, which this does not imply; see
/// [`balls_in_bins_precondition`] for the condition itself.
pub fn thm2_alpha_constraints(widths: &[usize]) -> Result<Vec<BoundReport>> {
    if widths.len() < 2 {
        return Err(Error::InvalidParameter("need at least d_1 and d_2".into()));
    }
    let mut out = Vec::with_capacity(2 * (widths.len() - 1));
    for k in 0..widths.len() - 1 {
        let (a, b) = (check_width(widths[k])?, check_width(widths[k + 1])?);
        let denom = b.ln() + a.ln();
        let first = 1.0 - ((b + 1.0).ln() - b.ln().ln()) / denom;
        let second = 1.0 - ((a + 1.0).ln() - a.ln().ln()) / denom;
        out.push(BoundReport::new(format!("layer {} row constraint", k + 2), first, 1.0, Direction::AtMost));
        out.push(BoundReport::new(format!("layer {} column constraint", k + 2), second, 1.0, Direction::AtMost));
    }
    Ok(out)
}

/// Minimum over [`thm2_alpha_constraints`].
pub fn thm2_max_alpha(widths: &[usize]) -> Result<f64> {
    Ok(thm2_alpha_constraints(widths)?.iter().map(|r| r.lhs).fold(f64::INFINITY, f64::min))
}

/// Whether `count` prunes per layer reach the balls-into-bins regime on
/// each side of a `rows x cols` mask: `count ≥ rows·log rows` and
/// `count ≥ cols·log cols`.
pub fn balls_in_bins_precondition(rows: usize, cols: usize, count: usize) -> (bool, bool) {
    let side = |n: usize| count as f64 >= n as f64 * (n as f64).ln();
    (side(rows), side(cols))
}

/// `(1 − d^{−1/3})^{2(l−2)} (1 − δ_l) [1 − (l−2) c₂ d^{−α/4} − Σ_{i<l} (l−i) δ_i]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub value: f64,
    /// False when the expression is not positive and so says nothing.
    pub non_vacuous: bool,
}

impl ProbabilityReport {
    fn new(value: f64) -> Self {
        ProbabilityReport {
            value,
            non_vacuous: value > 0.0,
        }
    }
}

pub fn thm2_probability(l: usize, d: f64, alpha: f64, c2: f64, norm_deltas: &[f64]) -> Result<ProbabilityReport> {
    if l < 3 || norm_deltas.len() != l {
        return Err(Error::InvalidParameter(format!("need l >= 3 and {l} deltas")));
    }
    if !(d >= 1.0 && alpha > 0.0 && c2 >= 0.0) {
        return Err(Error::InvalidParameter("need d >= 1, alpha > 0, c2 >= 0".into()));
    }
    let lf = l as f64;
    let head = (1.0 - d.powf(-1.0 / 3.0)).powf(2.0 * (lf - 2.0));
    let weighted: f64 = norm_deltas[..l - 1].iter().enumerate().map(|(i, dl)| (l - 1 - i) as f64 * dl).sum();
    let bracket = 1.0 - (lf - 2.0) * c2 * d.powf(-alpha / 4.0) - weighted;
    Ok(ProbabilityReport::new(head * (1.0 - norm_deltas[l - 1]) * bracket))
}

/// `2 − (log(d+1) + log log d) / log d`, the largest admissible α for
/// filter pruning.
pub fn thm3_alpha_constraint(d: usize) -> Result<f64> {
    let d = check_width(d)?;
    Ok(2.0 - ((d + 1.0).ln() + d.ln().ln()) / d.ln())
}

/// `p^{−β₁} L^{l−1} p₀ √d [p^{−β₁}(p^{−β₁} + d^{−β₂})^{l−2} − p^{−(l−1)β₁}]`.
#[allow(clippy::too_many_arguments)]
pub fn thm3_rhs(p: f64, d: f64, p0: f64, lipschitz: f64, l: usize, beta1: f64, beta2: f64) -> Result<f64> {
    if l < 3 {
        return Err(Error::InvalidParameter(format!("depth must be at least 3, got {l}")));
    }
    if !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0) {
        return Err(Error::InvalidParameter("need beta1 in (0, 1) and beta2 > 0".into()));
    }
    if !(p > 0.0 && d > 0.0 && p0 > 0.0 && lipschitz > 0.0) {
        return Err(Error::InvalidParameter("p, d, p0 and L must be positive".into()));
    }
    let lf = l as f64;
    let a = p.powf(-beta1);
    let bracket = a * (a + d.powf(-beta2)).powf(lf - 2.0) - p.powf(-(lf - 1.0) * beta1);
    Ok(a * lipschitz.powf(lf - 1.0) * p0 * d.sqrt() * bracket)
}

/// `(1 − d^{−1/3})^{2(l−2)} p̄` with
/// `p̄ = 1 − (l−2) C₄ (q²/p) d^{−α/4+β₂} − ((l²−l−2)/2) C₃ q²/p^{1−β₁} − C₅/p^{1−β₁}`.
#[allow(clippy::too_many_arguments)]
pub fn thm3_probability(
    l: usize,
    d: f64,
    p: f64,
    q: f64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    c3: f64,
    c4: f64,
    c5: f64,
) -> Result<ProbabilityReport> {
    if l < 3 {
        return Err(Error::InvalidParameter(format!("depth must be at least 3, got {l}")));
    }
    if !(d >= 1.0 && p > 0.0 && q > 0.0 && alpha > 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0) {
        return Err(Error::InvalidParameter("invalid parameters for the filter-pruning probability".into()));
    }
    if c3 < 0.0 || c4 < 0.0 || c5 < 0.0 {
        return Err(Error::InvalidParameter("constants must be nonnegative".into()));
    }
    let lf = l as f64;
    let pbar = 1.0
        - (lf - 2.0) * c4 * (q * q / p) * d.powf(-alpha / 4.0 + beta2)
        - (lf * lf - lf - 2.0) / 2.0 * c3 * q * q / p.powf(1.0 - beta1)
        - c5 / p.powf(1.0 - beta1);
    let head = (1.0 - d.powf(-1.0 / 3.0)).powf(2.0 * (lf - 2.0));
    Ok(ProbabilityReport::new(head * pbar))
}
