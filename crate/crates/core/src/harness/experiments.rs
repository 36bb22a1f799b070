//! Table reproductions, oracle cross-checks and the bound calculators.

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;

use crate::circulant::{build_full_map, convolve_direct, pad_kernel, spectral_norm_via_dft, ConvTensor};
use crate::error::Result;
use crate::estimators::{estimate_latala, estimate_lemma3, lemma3_delta0, LatalaDist};
use crate::linalg::{
    jacobi_singular_values, matvec, spectral_norm, spectral_norm_lanczos, vectorize, Matrix, Vector, DEFAULT_TOL,
};
use crate::sampling::{mix64, standard_normal, SeedSpec};
use crate::theory::{
    balls_in_bins_check, balls_in_bins_exact, chernoff_upper, order_stat_monte_carlo, order_stat_moment,
    order_stat_ratio, thm1_width_bound, thm2_alpha_constraints, thm2_delta0, thm2_max_alpha, thm2_probability,
    thm2_width_bound, thm3_alpha_constraint, thm3_probability, thm3_rhs, TheoremConstants,
};

use super::config::{
    BallsBinsParams, BinsConfig, BoundsParams, CirculantParams, OrderStatConfig, OrderStatsParams, OracleSuiteParams,
    Table2Params, Table3Params,
};
use super::report::{Cell, Report, Table};

pub(super) fn run_table2(p: &Table2Params, seed: u64, report: &mut Report) -> Result<()> {
    let mut t = Table::new(
        "table2",
        &["n1", "n2", "K", "mean", "std", "q", "c0", "delta0", "base_seed", "stream_index"],
    );
    for (i, row) in p.rows.iter().enumerate() {
        let s = SeedSpec::new(seed, i as u64);
        let est = estimate_lemma3(row.n1, row.n2, row.k, p.trials, &p.quantiles, s)?;
        for q in &est.quantiles {
            t.push(vec![
                row.n1.into(),
                row.n2.into(),
                row.k.into(),
                est.mean.into(),
                est.std.into(),
                q.q.into(),
                q.c0.into(),
                q.delta0.into(),
                s.base_seed.into(),
                s.stream_index.into(),
            ]);
        }
    }
    report.note("trial t of a row draws its matrix from child stream t of the row's seed");
    report.tables.push(t);
    Ok(())
}

pub(super) fn run_table3(p: &Table3Params, seed: u64, report: &mut Report) -> Result<()> {
    let mut t = Table::new(
        "table3",
        &["d", "dist", "alpha", "term1", "term2", "term3", "mean_norm", "C", "base_seed", "stream_index"],
    );
    for (i, row) in p.rows.iter().enumerate() {
        let s = SeedSpec::new(seed, i as u64);
        let est = estimate_latala(row.d, row.dist, row.alpha, p.trials, s)?;
        t.push(vec![
            row.d.into(),
            row.dist.as_str().into(),
            row.alpha.into(),
            est.term1.into(),
            est.term2.into(),
            est.term3.into(),
            est.mean_norm.into(),
            est.c.into(),
            s.base_seed.into(),
            s.stream_index.into(),
        ]);
    }
    report.note("moment terms are empirical averages over the sampled matrices");
    report.tables.push(t);
    Ok(())
}

/// The two specializations with `p = 1, 2` in closed form, as exact rationals.
fn displayed_specialization(n: u64, r: u64, p: u32) -> Option<Ratio<u128>> {
    let (n, r) = (n as u128, r as u128);
    match p {
        1 => Some(Ratio::new((r + 1) * r, (n + 2) * (n + 1))),
        2 => Some(Ratio::new(
            (r + 3) * (r + 2) * (r + 1) * r,
            (n + 4) * (n + 3) * (n + 2) * (n + 1),
        )),
        _ => None,
    }
}

fn order_stats_into(
    configs: &[OrderStatConfig],
    a: f64,
    trials: usize,
    sigmas: f64,
    seed: u64,
    name: &str,
    report: &mut Report,
) -> Result<()> {
    let mut t = Table::new(
        name,
        &[
            "n",
            "r",
            "p",
            "a",
            "exact_ratio",
            "specialization_matches",
            "closed_form",
            "mc_mean",
            "std_err",
            "z",
            "within",
            "base_seed",
            "stream_index",
        ],
    );
    let mut failed = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let s = SeedSpec::new(seed, i as u64);
        let ratio = order_stat_ratio(c.n, c.r, c.p)?;
        let special = displayed_specialization(c.n, c.r, c.p).map(|x| x == ratio);
        let exact = order_stat_moment(a, c.n, c.r, c.p)?;
        let mc = order_stat_monte_carlo(a, c.n as usize, c.r as usize, c.p, trials, s)?;
        let within = mc.within(exact, sigmas);
        if !within || special == Some(false) {
            failed.push(format!("(n={}, r={}, p={})", c.n, c.r, c.p));
        }
        t.push(vec![
            c.n.into(),
            c.r.into(),
            (c.p as u64).into(),
            a.into(),
            format!("{}/{}", ratio.numer(), ratio.denom()).into(),
            special.into(),
            exact.into(),
            mc.mean.into(),
            mc.std_err.into(),
            ((mc.mean - exact) / mc.std_err).into(),
            within.into(),
            s.base_seed.into(),
            s.stream_index.into(),
        ]);
    }
    report.tables.push(t);
    report.check(
        format!("{name}: Monte Carlo within {sigmas} standard errors, specializations exact"),
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} configurations", configs.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    );
    Ok(())
}

pub(super) fn run_order_stats(p: &OrderStatsParams, seed: u64, report: &mut Report) -> Result<()> {
    order_stats_into(&p.configs, p.a, p.trials, p.sigmas, seed, "order-stats", report)
}

fn balls_bins_into(
    exact: &[BinsConfig],
    guarantee: &[BinsConfig],
    trials: usize,
    sigmas: f64,
    seed: u64,
    prefix: &str,
    report: &mut Report,
) -> Result<()> {
    let mut te = Table::new(
        &format!("{prefix}exact"),
        &[
            "bins",
            "balls",
            "favorable",
            "total",
            "exact",
            "mc",
            "std_err",
            "within",
            "base_seed",
            "stream_index",
        ],
    );
    for (i, c) in exact.iter().enumerate() {
        let s = SeedSpec::new(seed, i as u64);
        let balls = c.balls();
        let (fav, total) = balls_in_bins_exact(c.bins, balls)?;
        let pe = fav as f64 / total as f64;
        let mc = balls_in_bins_check(c.bins, balls, trials, s)?;
        // A zero standard error only matches an exact value of 0 or 1.
        let within = (mc.empirical - pe).abs() <= sigmas * mc.std_err || (mc.std_err == 0.0 && mc.empirical == pe);
        report.check(
            format!("{prefix}exact n={} N={balls}: Monte Carlo within {sigmas} standard errors", c.bins),
            within,
            format!("exact {fav}/{total} = {pe}, mc {} ± {}", mc.empirical, mc.std_err),
        );
        te.push(vec![
            c.bins.into(),
            balls.into(),
            fav.into(),
            total.into(),
            pe.into(),
            mc.empirical.into(),
            mc.std_err.into(),
            within.into(),
            s.base_seed.into(),
            s.stream_index.into(),
        ]);
    }
    let mut tg = Table::new(
        &format!("{prefix}guarantee"),
        &[
            "bins",
            "balls",
            "mc",
            "std_err",
            "guarantee",
            "applies",
            "holds",
            "base_seed",
            "stream_index",
        ],
    );
    let offset = exact.len();
    for (i, c) in guarantee.iter().enumerate() {
        let s = SeedSpec::new(seed, (offset + i) as u64);
        let balls = c.balls();
        let mc = balls_in_bins_check(c.bins, balls, trials, s)?;
        let holds = mc.empirical >= mc.guarantee - sigmas * mc.std_err;
        if mc.guarantee_applies {
            report.check(
                format!("{prefix}guarantee n={} N={balls}: P(max <= 3N/n) >= 1 - n^(-1/3)", c.bins),
                holds,
                format!("mc {} ± {}, guarantee {}", mc.empirical, mc.std_err, mc.guarantee),
            );
        }
        tg.push(vec![
            c.bins.into(),
            balls.into(),
            mc.empirical.into(),
            mc.std_err.into(),
            mc.guarantee.into(),
            mc.guarantee_applies.into(),
            Cell::from(mc.guarantee_applies.then_some(holds)),
            s.base_seed.into(),
            s.stream_index.into(),
        ]);
    }
    report.tables.push(te);
    report.tables.push(tg);
    Ok(())
}

pub(super) fn run_balls_bins(p: &BallsBinsParams, seed: u64, report: &mut Report) -> Result<()> {
    balls_bins_into(&p.exact, &p.guarantee, p.trials, p.sigmas, seed, "balls-bins-", report)
}

/// One random instance of the convolution/circulant cross-check.
struct CircInstance {
    dims: [usize; 4],
    conv_err: f64,
    dft: f64,
    explicit: f64,
}

fn circulant_instance(p: &CirculantParams, seed: SeedSpec) -> Result<CircInstance> {
    let mut rng = seed.rng();
    let dout = rng.random_range(1..=p.max_channels);
    let din = rng.random_range(1..=p.max_channels);
    let sp = rng.random_range(2..=p.max_spatial);
    let q = rng.random_range(1..sp);
    let data: Vec<f64> = (0..dout * din * q * q).map(|_| standard_normal(&mut rng)).collect();
    let f = ConvTensor::new(dout, din, q, data)?;
    let x: Vec<f64> = (0..din * sp * sp).map(|_| standard_normal(&mut rng)).collect();
    let k = pad_kernel(&f, sp)?;
    let w = build_full_map(&k);
    let direct = convolve_direct(&f, sp, &x)?;
    let via_map = matvec(&w, &Vector::new(x)?)?;
    let conv_err = direct
        .iter()
        .zip(via_map.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let dft = spectral_norm_via_dft(&k)?;
    let explicit = jacobi_singular_values(&w)[0];
    Ok(CircInstance {
        dims: [dout, din, sp, q],
        conv_err,
        dft,
        explicit,
    })
}

fn circulant_into(p: &CirculantParams, seed: u64, name: &str, report: &mut Report) -> Result<()> {
    let instances: Vec<CircInstance> = (0..p.instances)
        .into_par_iter()
        .map(|i| circulant_instance(p, SeedSpec::new(seed, i as u64)))
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        name,
        &[
            "instance",
            "d_out",
            "d_in",
            "p",
            "q",
            "conv_max_abs_err",
            "dft_norm",
            "explicit_norm",
            "rel_err",
            "base_seed",
            "stream_index",
        ],
    );
    let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
    for (i, c) in instances.iter().enumerate() {
        let rel = (c.dft - c.explicit).abs() / c.explicit.max(f64::MIN_POSITIVE);
        worst_abs = worst_abs.max(c.conv_err);
        worst_rel = worst_rel.max(rel);
        t.push(vec![
            i.into(),
            c.dims[0].into(),
            c.dims[1].into(),
            c.dims[2].into(),
            c.dims[3].into(),
            c.conv_err.into(),
            c.dft.into(),
            c.explicit.into(),
            rel.into(),
            seed.into(),
            i.into(),
        ]);
    }
    report.tables.push(t);
    report.check(
        format!("{name}: circulant map equals the wrap-around convolution"),
        worst_abs <= p.abs_tol,
        format!("max abs error {worst_abs:e} (tolerance {:e})", p.abs_tol),
    );
    report.check(
        format!("{name}: DFT norm equals the explicit SVD norm"),
        worst_rel <= p.rel_tol,
        format!("max rel error {worst_rel:e} (tolerance {:e})", p.rel_tol),
    );
    Ok(())
}

pub(super) fn run_circulant(p: &CirculantParams, seed: u64, report: &mut Report) -> Result<()> {
    report.note("explicit norms are the top singular value of the full map by one-sided Jacobi");
    circulant_into(p, seed, "circulant-equiv", report)
}

pub(super) fn run_bounds(p: &BoundsParams, seed: u64, report: &mut Report) -> Result<()> {
    let l = p.depth;
    let d = p.width;
    let lipschitz = p.lipschitz.clone().unwrap_or_else(|| vec![1.0; l - 1]);
    let mut t = Table::new("bounds", &["quantity", "value", "detail"]);
    let row = |t: &mut Table, name: &str, v: f64, detail: String| {
        t.push(vec![name.into(), v.into(), detail.into()]);
    };

    let (c0, delta0) = match (p.c0, p.delta0) {
        (Some(c0), Some(d0)) => (c0, d0),
        (c0, d0) => {
            let s = SeedSpec::new(seed, 0);
            let est = estimate_lemma3(d, d, p.k, p.trials, &[p.quantile], s)?;
            let q = &est.quantiles[0];
            report.note(format!(
                "c0/delta0 not supplied: estimated from {} uniform {d}x{d} matrices at q={} (seed {}, stream {})",
                p.trials, p.quantile, s.base_seed, s.stream_index
            ));
            (c0.unwrap_or(q.c0), d0.unwrap_or(lemma3_delta0(p.quantile, d, d)))
        }
    };
    let c1 = match p.c1 {
        Some(c) => c,
        None => {
            let s = SeedSpec::new(seed, 1);
            let est = estimate_latala(d, LatalaDist::Uniform, None, p.trials, s)?;
            report.note(format!(
                "c1 not supplied: substituted the empirical Latala constant C={} from {} uniform {d}x{d} matrices (seed {}, stream {})",
                est.c, p.trials, s.base_seed, s.stream_index
            ));
            est.c
        }
    };
    let (k1, k2) = (p.k * p.k / 3.0, p.k.powi(4) / 5.0);
    let c2_mag = TheoremConstants::magnitude_scheme_c2(c1, p.k);
    let c2_rand = TheoremConstants::random_scheme_c2(c1, k1, k2);
    let norm_bounds = p.norm_bounds.clone().unwrap_or_else(|| vec![c0.max(1.0); l]);
    let norm_deltas = p.norm_deltas.clone().unwrap_or_else(|| vec![0.005; l]);
    let mut consts = TheoremConstants {
        c0,
        delta0,
        c1,
        c2: c2_mag,
        norm_bounds,
        norm_deltas: norm_deltas.clone(),
        k: p.k,
        k1,
        k2,
    };
    consts.validate()?;
    row(&mut t, "c0", c0, format!("q={}", p.quantile));
    row(&mut t, "delta0", delta0, String::new());
    row(&mut t, "c1", c1, String::new());
    row(&mut t, "c2_magnitude", c2_mag, "C K (2 sqrt 2 + 24^(1/4))".into());
    row(&mut t, "c2_random", c2_rand, "c1 (2 sqrt(3 K1) + K2^(1/4)), K1=K^2/3, K2=K^4/5".into());

    let w1 = thm1_width_bound(&consts, l, &lipschitz, p.alpha, p.eps, p.delta)?;
    row(&mut t, "magnitude_width_bound", w1.bound as f64, format!("terms {:?}", w1.terms));
    consts.c2 = c2_rand;
    let d0 = thm2_delta0(p.delta, &norm_deltas);
    row(&mut t, "random_delta0", d0, String::new());
    match thm2_width_bound(&consts, l, &lipschitz, p.alpha, p.eps, p.delta) {
        Ok(w2) => row(&mut t, "random_width_bound", w2.bound as f64, format!("terms {:?}", w2.terms)),
        Err(e) => row(&mut t, "random_width_bound", f64::NAN, e.to_string()),
    }
    let widths = vec![d; l - 1];
    let constraints = thm2_alpha_constraints(&widths)?;
    let max_alpha = thm2_max_alpha(&widths)?;
    row(
        &mut t,
        "random_max_alpha",
        max_alpha,
        format!("{} constraints; alpha={} admissible: {}", constraints.len(), p.alpha, p.alpha <= max_alpha),
    );
    let prob = thm2_probability(l, d as f64, p.alpha, c2_rand, &norm_deltas)?;
    row(&mut t, "random_probability", prob.value, format!("non_vacuous={}", prob.non_vacuous));
    let mu = (d as f64).ln();
    row(
        &mut t,
        "chernoff_mu_ln_d_delta_2",
        chernoff_upper(mu, 2.0)?,
        format!("d^(-4/3) = {}", (d as f64).powf(-4.0 / 3.0)),
    );

    let c = &p.cnn;
    let a3 = thm3_alpha_constraint(c.width)?;
    row(
        &mut t,
        "filter_max_alpha",
        a3,
        format!("d={}; alpha={} admissible: {}", c.width, c.alpha, c.alpha <= a3),
    );
    if !(c.beta2 < c.alpha / 4.0) {
        report.note(format!("beta2={} is not below alpha/4={}", c.beta2, c.alpha / 4.0));
    }
    let rhs = thm3_rhs(c.spatial, c.width as f64, c.p0, c.lipschitz, c.depth, c.beta1, c.beta2)?;
    row(&mut t, "filter_gap_rhs", rhs, format!("p={} d={}", c.spatial, c.width));
    let p3 = thm3_probability(
        c.depth,
        c.width as f64,
        c.spatial,
        c.kernel,
        c.alpha,
        c.beta1,
        c.beta2,
        c.c3,
        c.c4,
        c.c5,
    )?;
    row(&mut t, "filter_probability", p3.value, format!("non_vacuous={}", p3.non_vacuous));
    report.tables.push(t);
    Ok(())
}

fn close(a: f64, b: f64, decimals: i32) -> bool {
    let s = 10f64.powi(decimals);
    (a * s).round() == (b * s).round()
}

fn linalg_into(instances: usize, seed: u64, report: &mut Report) -> Result<()> {
    let mut t = Table::new(
        "oracle-linalg",
        &["instance", "rows", "cols", "power", "lanczos", "jacobi", "base_seed", "stream_index"],
    );
    let mut worst = 0.0f64;
    for i in 0..instances {
        let s = SeedSpec::new(seed, i as u64);
        let mut rng = s.rng();
        let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let m = Matrix::from_fn(r, c, |_, _| standard_normal(&mut rng));
        let pw = spectral_norm(&m, DEFAULT_TOL)?;
        let lz = spectral_norm_lanczos(&m, DEFAULT_TOL)?;
        let jc = jacobi_singular_values(&m)[0];
        worst = worst.max((pw - jc).abs() / jc).max((lz - jc).abs() / jc);
        t.push(vec![
            i.into(),
            r.into(),
            c.into(),
            pw.into(),
            lz.into(),
            jc.into(),
            s.base_seed.into(),
            s.stream_index.into(),
        ]);
    }
    report.tables.push(t);
    report.check(
        "oracle-linalg: power iteration and Lanczos match the Jacobi SVD",
        worst <= 1e-8,
        format!("max rel error {worst:e}"),
    );
    let m = Matrix::from_rows(&[vec![2.0, -2.0], vec![0.1, 0.1]])?;
    let v = spectral_norm(&m, DEFAULT_TOL)?;
    report.check(
        "oracle-linalg: start vector inside a lower invariant subspace",
        (v - 8f64.sqrt()).abs() < 1e-9,
        format!("{v}"),
    );
    let x = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
    report.check(
        "oracle-linalg: vec stacks columns",
        vectorize(&x).as_slice() == [0.0, 2.0, 4.0, 1.0, 3.0, 5.0],
        String::new(),
    );
    Ok(())
}

pub(super) fn run_oracle_suite(p: &OracleSuiteParams, seed: u64, report: &mut Report) -> Result<()> {
    let mut anchors = Table::new("oracle-closed-forms", &["quantity", "value", "expected", "passed"]);
    let mut anchor = |report: &mut Report, name: &str, value: f64, expected: f64, ok: bool| {
        anchors.push(vec![name.into(), value.into(), expected.into(), ok.into()]);
        report.check(format!("closed form: {name}"), ok, format!("{value} vs {expected}"));
    };
    let v = thm3_alpha_constraint(128)?;
    anchor(report, "filter max alpha d=128", v, 0.6729, close(v, 0.6729, 4));
    let v = thm3_alpha_constraint(1024)?;
    anchor(report, "filter max alpha d=1024", v, 0.7205, close(v, 0.7205, 4));
    let v = thm2_max_alpha(&[1024, 1024])?;
    anchor(report, "random max alpha d=1024", v, 0.6396, close(v, 0.6396, 4));
    let v = order_stat_moment(1.0, 100, 10, 1)?;
    anchor(report, "order statistic n=100 r=10", v, 110.0 / 10302.0, (v - 110.0 / 10302.0).abs() < 1e-15);
    let v = lemma3_delta0(0.95, 32, 32);
    anchor(report, "delta0 q=0.95 n=32", v, 0.029, close(v, 0.029, 3));
    let v = chernoff_upper(3.0, 1.0)?;
    anchor(report, "chernoff mu=3 delta=1", v, (-1.5f64).exp(), (v - (-1.5f64).exp()).abs() < 1e-15);
    let consts = TheoremConstants {
        c0: 1.0,
        delta0: 1.0,
        c1: 1.0,
        c2: 1.0,
        norm_bounds: vec![],
        norm_deltas: vec![],
        k: 1.0,
        k1: 1.0,
        k2: 1.0,
    };
    let v = thm1_width_bound(&consts, 3, &[1.0, 1.0], 0.5, 0.1, 0.1)?.bound as f64;
    anchor(report, "magnitude width bound example", v, 4900.0, v == 4900.0);
    let v = thm2_probability(3, 1e6, 0.6, 1.0, &[0.0; 3])?.value;
    let expected = 0.99f64.powi(2) * (1.0 - 10f64.powf(-0.9));
    anchor(report, "random probability example", v, expected, (v - expected).abs() < 1e-12);
    report.tables.push(anchors);

    // Each sub-check runs on its own base seed derived from the suite's.
    let configs: Vec<OrderStatConfig> = [(4, 2, 1), (16, 16, 1), (100, 10, 1), (256, 200, 2), (1024, 1, 1)]
        .into_iter()
        .map(|(n, r, p)| OrderStatConfig { n, r, p })
        .collect();
    order_stats_into(&configs, 1.0, p.trials, p.sigmas, seed, "oracle-order-stats", report)?;
    balls_bins_into(
        &[BinsConfig { bins: 4, balls: Some(8) }, BinsConfig { bins: 3, balls: Some(9) }],
        &[BinsConfig { bins: 32, balls: None }, BinsConfig { bins: 64, balls: None }],
        p.trials,
        p.sigmas,
        mix64(seed ^ 1),
        "oracle-balls-bins-",
        report,
    )?;
    let circ = CirculantParams {
        instances: p.circulant_instances,
        ..CirculantParams::default()
    };
    circulant_into(&circ, mix64(seed ^ 2), "oracle-circulant", report)?;
    linalg_into(p.linalg_instances, mix64(seed ^ 3), report)?;
    Ok(())
}
