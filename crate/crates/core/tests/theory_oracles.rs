//! Bound formulas against independent evaluations, and the probabilistic
//! lemmas against enumeration or simulation.

use num_rational::Ratio;
use probprune_core::estimators::{estimate_latala, verify_latala_bound};
use probprune_core::theory::{
    balls_in_bins_check, balls_in_bins_exact, order_stat_moment, order_stat_ratio, thm2_alpha_constraints,
    thm2_probability, thm3_alpha_constraint, thm3_probability, thm3_rhs,
};
use probprune_core::{LatalaDist, SeedSpec};

fn round(x: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (x * s).round() / s
}

#[test]
fn thm3_alpha_constraint_anchors() {
    assert_eq!(round(thm3_alpha_constraint(128).unwrap(), 4), 0.6729);
    assert_eq!(round(thm3_alpha_constraint(1024).unwrap(), 4), 0.7205);
    // Base-2 logs give the same ratio; an independent route to both values.
    for d in [128usize, 1024] {
        let x = d as f64;
        let want = 2.0 - ((x + 1.0).log2() + (x.log2() * 2f64.ln()).ln() / 2f64.ln()) / x.log2();
        assert!((thm3_alpha_constraint(d).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn thm3_rhs_by_expanding_the_bracket() {
    // With l = 3 the bracket is a(a + b) − a² = a·b, so the bound collapses
    // to a²·L²·p₀·√d·d^{−β₂}.
    let (p, d, beta1, beta2): (f64, f64, f64, f64) = (32.0, 64.0, 0.5, 0.1);
    let a = p.powf(-beta1);
    let collapsed = a * a * d.sqrt() * d.powf(-beta2);
    let got = thm3_rhs(p, d, 1.0, 1.0, 3, beta1, beta2).unwrap();
    assert!((got - collapsed).abs() < 1e-15);
    assert_eq!(round(got, 5), 0.16494);
}

#[test]
fn thm3_rhs_deeper_networks_by_binomial_sum() {
    // a(a+b)^{l−2} − a^{l−1} = a Σ_{j≥1} C(l−2, j) a^{l−2−j} b^j.
    let (p, d, l, lip, p0, b1, b2) = (16.0f64, 100.0f64, 6usize, 1.3f64, 0.7f64, 0.3f64, 0.2f64);
    let a = p.powf(-b1);
    let b = d.powf(-b2);
    let n = l - 2;
    let mut binom = 1.0;
    let mut tail = 0.0;
    for j in 1..=n {
        binom *= (n - j + 1) as f64 / j as f64;
        tail += binom * a.powi((n - j) as i32) * b.powi(j as i32);
    }
    let want = a * lip.powi(l as i32 - 1) * p0 * d.sqrt() * a * tail;
    let got = thm3_rhs(p, d, p0, lip, l, b1, b2).unwrap();
    assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
    assert!(got > 0.0);
}

#[test]
fn thm2_probability_direct_evaluation() {
    let r = thm2_probability(3, 1e6, 0.6, 1.0, &[0.0; 3]).unwrap();
    let want = 0.99f64 * 0.99 * (1.0 - 10f64.powf(-0.9));
    assert!((r.value - want).abs() < 1e-12);
    assert_eq!(round(r.value, 5), 0.85671);
    assert!(r.non_vacuous);
    let zero = thm2_probability(4, 1e6, 0.6, 1.0, &[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(zero.value, 0.0);
    assert!(!zero.non_vacuous);
}

#[test]
fn thm2_probability_weights_earlier_deltas_more() {
    // Σ (l−i) δ_i for l = 4: δ₁ weighs 3, δ₂ weighs 2, δ₃ weighs 1.
    let base = thm2_probability(4, 1e4, 0.5, 0.0, &[0.0; 4]).unwrap().value;
    let head = (1.0 - 1e4f64.powf(-1.0 / 3.0)).powi(4);
    assert!((base - head).abs() < 1e-12);
    for (i, w) in [3.0, 2.0, 1.0].iter().enumerate() {
        let mut deltas = [0.0; 4];
        deltas[i] = 0.01;
        let v = thm2_probability(4, 1e4, 0.5, 0.0, &deltas).unwrap().value;
        assert!((v - head * (1.0 - w * 0.01)).abs() < 1e-12);
    }
}

/// Independent transcription of the filter-pruning probability.
#[allow(clippy::too_many_arguments)]
fn thm3_probability_oracle(l: f64, d: f64, p: f64, q: f64, alpha: f64, b1: f64, b2: f64, c: [f64; 3]) -> f64 {
    let [c3, c4, c5] = c;
    let q2p = q * q / p;
    let term_c4 = (l - 2.0) * c4 * q2p * (d.ln() * (b2 - alpha / 4.0)).exp();
    let pairs = (l + 1.0) * (l - 2.0) / 2.0; // l² − l − 2 factored
    let shrink = (-(1.0 - b1) * p.ln()).exp();
    let pbar = 1.0 - term_c4 - pairs * c3 * q * q * shrink - c5 * shrink;
    let cube = 1.0 - 1.0 / d.cbrt();
    cube.powf(2.0 * (l - 2.0)) * pbar
}

#[test]
fn thm3_probability_dual_implementation() {
    let got = thm3_probability(3, 256.0, 32.0, 3.0, 0.6, 0.1, 0.05, 0.6, 0.6, 0.6).unwrap();
    let want = thm3_probability_oracle(3.0, 256.0, 32.0, 3.0, 0.6, 0.1, 0.05, [0.6; 3]);
    assert!((got.value - want).abs() < 1e-12, "{} vs {want}", got.value);
    assert_eq!(got.non_vacuous, want > 0.0);

    for &(l, d, p) in &[(4usize, 1e4, 64.0), (5, 1e6, 1e3), (3, 10.0, 4.0)] {
        let got = thm3_probability(l, d, p, 3.0, 0.5, 0.2, 0.1, 0.01, 0.2, 0.3).unwrap().value;
        let want = thm3_probability_oracle(l as f64, d, p, 3.0, 0.5, 0.2, 0.1, [0.01, 0.2, 0.3]);
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
    }

    let free = thm3_probability(4, 1e3, 8.0, 3.0, 0.5, 0.2, 0.1, 0.0, 0.0, 0.0).unwrap();
    assert!((free.value - (1.0 - 0.1f64).powi(4)).abs() < 1e-12);
}

#[test]
fn thm2_constraints_cover_each_internal_layer() {
    let widths = [64usize, 128, 128, 64];
    let reports = thm2_alpha_constraints(&widths).unwrap();
    assert_eq!(reports.len(), 2 * (widths.len() - 1));
    // The admissible α sits in `lhs`; recompute it in base 10.
    for (k, pair) in reports.chunks(2).enumerate() {
        let (a, b) = (widths[k] as f64, widths[k + 1] as f64);
        let lg = |x: f64| x.log10();
        let lglg = |x: f64| (x.ln()).ln() / 10f64.ln();
        let first = 1.0 - (lg(b + 1.0) - lglg(b)) / (lg(a) + lg(b));
        let second = 1.0 - (lg(a + 1.0) - lglg(a)) / (lg(a) + lg(b));
        assert!((pair[0].lhs - first).abs() < 1e-12);
        assert!((pair[1].lhs - second).abs() < 1e-12);
        assert!(pair.iter().all(|r| r.lhs > 0.0 && r.lhs < 1.0));
    }
    // Equal widths: the two constraints of a pair coincide.
    let square = thm2_alpha_constraints(&[100, 100]).unwrap();
    assert_eq!(square.len(), 2);
    assert!((square[0].lhs - square[1].lhs).abs() < 1e-15);
}

#[test]
fn order_stat_specializations_and_sum_identity() {
    for n in 1..=50u64 {
        let total: f64 = (1..=n).map(|r| order_stat_moment(1.5, n, r, 1).unwrap()).sum();
        assert!((total - n as f64 * 1.5 * 1.5 / 3.0).abs() < 1e-10, "n = {n}");
        for r in 1..=n {
            let want1 = Ratio::new((r + 1) as u128 * r as u128, (n + 2) as u128 * (n + 1) as u128);
            assert_eq!(order_stat_ratio(n, r, 1).unwrap(), want1);
            let want2 = Ratio::new(
                ((r + 3) * (r + 2) * (r + 1) * r) as u128,
                ((n + 4) * (n + 3) * (n + 2) * (n + 1)) as u128,
            );
            assert_eq!(order_stat_ratio(n, r, 2).unwrap(), want2);
        }
    }
}

#[test]
fn balls_bins_exact_and_simulated_agree() {
    let (fav, total) = balls_in_bins_exact(4, 8).unwrap();
    assert_eq!(total, 65_536);
    assert_eq!(total - fav, 100);
    for (bins, balls) in [(4usize, 8usize), (3, 9), (5, 6)] {
        let (fav, total) = balls_in_bins_exact(bins, balls).unwrap();
        let p = fav as f64 / total as f64;
        let mc = balls_in_bins_check(bins, balls, 20_000, SeedSpec::new(21, bins as u64)).unwrap();
        let se = (p * (1.0 - p) / 20_000.0).sqrt().max(1e-4);
        assert!((mc.empirical - p).abs() <= 4.0 * se, "{bins}/{balls}: {} vs {p}", mc.empirical);
    }
}

#[test]
fn latala_cap_holds_at_one_and_fails_at_half() {
    let ok = verify_latala_bound(64, LatalaDist::Uniform, None, 200, SeedSpec::new(5, 0), 1.0).unwrap();
    assert!(ok.satisfied);
    let row = estimate_latala(512, LatalaDist::Uniform, None, 100, SeedSpec::new(5, 1)).unwrap();
    assert!(row.c > 0.5 && row.c < 0.7, "{}", row.c);
    let tight = verify_latala_bound(512, LatalaDist::Uniform, None, 100, SeedSpec::new(5, 1), 0.5).unwrap();
    assert!(!tight.satisfied);
}
