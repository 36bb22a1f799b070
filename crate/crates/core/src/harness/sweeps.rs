//! Monte Carlo sweeps of the pruned-versus-target gap.
//!
//! Row `(d, trial)` runs on `SeedSpec::new(seed, (d_index << 32) | trial)`.
//! Its target weights come from child stream 0, the mask from child 1 and
//! the evaluation points from child 2, so any row can be recomputed alone.
//! Every scheme and α of a row prunes the same target network.

use rayon::prelude::*;

use crate::circulant::{build_full_map, pad_kernel, spectral_norm_via_dft, ConvTensor};
use crate::error::{Error, Result};
use crate::estimators::{empirical_quantile, estimate_latala, LatalaDist};
use crate::linalg::{spectral_norm_lanczos, Matrix, DEFAULT_TOL};
use crate::networks::{estimate_sup_gap, CnnModel, Domain, FcnModel, LayerMask, MaskSet, Network};
use crate::pruning::{build_mask, layer_counts, zero_load_event, PruneAmount, PruneScheme, PruneSpec};
use crate::sampling::{DistributionSpec, SeedSpec};
use crate::theory::{
    balls_in_bins_precondition, thm2_alpha_constraints, thm3_alpha_constraint, thm3_probability, thm3_rhs,
    TheoremConstants,
};

use super::config::{CnnSweepParams, FcnSweepParams, Params, ResolvedConfig};
use super::report::{Cell, Report, Table};

/// Streams of the in-run Latala estimates sit above every row stream.
const LATALA_STREAM: u64 = 1 << 63;

pub(super) const GAP_NOTE: &str =
    "sampled_sup_gap is the maximum over the sampled points, a lower bound on the supremum";

fn row_seed(seed: u64, d_index: usize, trial: usize) -> SeedSpec {
    SeedSpec::new(seed, ((d_index as u64) << 32) | trial as u64)
}

fn norm(m: &Matrix) -> Result<f64> {
    spectral_norm_lanczos(m, DEFAULT_TOL)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    empirical_quantile(&v, q)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn ordered_widths(widths: &[usize]) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = widths.iter().copied().enumerate().collect();
    v.sort_by_key(|&(_, d)| d);
    v
}

fn as_f64(xs: &[usize]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}

// ---- FCN ----

struct FcnOutcome {
    counts: Vec<usize>,
    diff_norms: Vec<f64>,
    gap: f64,
    /// Zero-load event per internal layer (rows and columns both).
    zero_load: Vec<bool>,
}

struct FcnTrial {
    target_norms: Vec<f64>,
    /// Indexed `[alpha][scheme]`.
    outcomes: Vec<Vec<FcnOutcome>>,
    control_gap: f64,
}

fn fcn_widths(p: &FcnSweepParams, d: usize) -> Vec<usize> {
    let mut w = vec![p.input_dim];
    w.extend(std::iter::repeat_n(d, p.depth - 1));
    w.push(p.output_dim);
    w
}

fn check_fcn_alphas(p: &FcnSweepParams) -> Result<()> {
    for &alpha in &p.alphas {
        for &scheme in &p.schemes {
            if scheme.is_random() {
                for &d in &p.widths {
                    let widths = vec![d; p.depth - 1];
                    for c in thm2_alpha_constraints(&widths)? {
                        if alpha > c.lhs {
                            return Err(Error::InadmissibleAlpha(format!(
                                "alpha={alpha} exceeds the {} bound {} at d={d} for {}",
                                c.name,
                                c.lhs,
                                scheme.as_str()
                            )));
                        }
                    }
                }
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InadmissibleAlpha(format!(
                    "alpha={alpha} is outside (0, 1) for {}",
                    scheme.as_str()
                )));
            }
        }
    }
    Ok(())
}

fn fcn_model(p: &FcnSweepParams, d: usize, s: SeedSpec) -> Result<FcnModel> {
    let dist = DistributionSpec::xavier_uniform(p.weight_scale);
    FcnModel::sample(&fcn_widths(p, d), p.activation, &dist, s.child(0))
}

fn fcn_trial(p: &FcnSweepParams, d: usize, s: SeedSpec) -> Result<FcnTrial> {
    let model = fcn_model(p, d, s)?;
    let target_norms = model.weights().iter().map(norm).collect::<Result<Vec<_>>>()?;
    let net = Network::Fcn(model);
    let l = p.depth;
    let mut outcomes = Vec::with_capacity(p.alphas.len());
    for &alpha in &p.alphas {
        let mut per_scheme = Vec::with_capacity(p.schemes.len());
        for &scheme in &p.schemes {
            let spec = PruneSpec {
                scheme,
                amount: PruneAmount::Alpha(alpha),
                seed: Some(s.child(1)),
            };
            let counts = layer_counts(&spec, &net)?;
            let mask = build_mask(&spec, &net)?;
            let pruned = net.pruned(&mask)?;
            let (Network::Fcn(t), Network::Fcn(q)) = (&net, &pruned) else {
                unreachable!("fcn sweep builds fcn networks")
            };
            let mut diff_norms = vec![0.0; l];
            for k in 1..l - 1 {
                diff_norms[k] = norm(&t.weights()[k].sub(&q.weights()[k])?)?;
            }
            let zero_load = (1..l - 1)
                .map(|k| {
                    let (r, c) = zero_load_event(mask.layers()[k].matrix(), counts[k]);
                    r && c
                })
                .collect();
            let gap = estimate_sup_gap(&net, &pruned, Domain::Sphere, p.samples, s.child(2))?.sup;
            per_scheme.push(FcnOutcome {
                counts,
                diff_norms,
                gap,
                zero_load,
            });
        }
        outcomes.push(per_scheme);
    }
    let Network::Fcn(m) = &net else { unreachable!() };
    let control = net.pruned(&MaskSet::all_ones_fcn(m))?;
    let control_gap = estimate_sup_gap(&net, &control, Domain::Sphere, p.samples, s.child(2))?.sup;
    Ok(FcnTrial {
        target_norms,
        outcomes,
        control_gap,
    })
}

/// Bound on `E‖W_k − W_k*‖₂` checked for `scheme`, with the proof's event
/// threshold: magnitude `Ĉ d^{−2α}` (threshold `d^{−α}`), random
/// `ĉ₂ d^{−α/2}` with `ĉ₂ = Ĉ(2√(3K₁) + K₂^{1/4})` (threshold `d^{−α/4}`).
fn fcn_bounds(scheme: PruneScheme, c_hat: f64, k: f64, d: usize, alpha: f64) -> (f64, f64, f64) {
    let d = d as f64;
    if scheme.is_random() {
        let c2 = TheoremConstants::random_scheme_c2(c_hat, k * k / 3.0, k.powi(4) / 5.0);
        (c2 * d.powf(-alpha / 2.0), c2, d.powf(-alpha / 4.0))
    } else {
        let c2 = TheoremConstants::magnitude_scheme_c2(c_hat, k);
        (c_hat * d.powf(-2.0 * alpha), c2, d.powf(-alpha))
    }
}

/// Gap sweep over FCN widths, magnitude and random schemes side by side.
pub fn run_fcn_gap_sweep(p: &FcnSweepParams, seed: u64, report: &mut Report) -> Result<()> {
    check_fcn_alphas(p)?;
    let l = p.depth;
    report.note(GAP_NOTE);
    report.note("inputs are drawn from the unit sphere; for positively homogeneous activations this gives the unit-ball supremum");
    if !p.activation.positively_homogeneous() {
        report.note("the activation is not positively homogeneous, so the sphere maximum may understate the ball supremum");
    }
    report.note("layers are numbered 1..l; per-layer lists run over all l layers unless named internal");
    report.note("magnitude bound: C*d^(-2 alpha); random bound: c2*d^(-alpha/2) with c2 = C(2 sqrt(3K1) + K2^(1/4)), K1=K^2/3, K2=K^4/5; C is the in-run Latala estimate");

    let mut trials_t = Table::new(
        "trials",
        &[
            "d",
            "alpha",
            "scheme",
            "trial",
            "prune_counts",
            "diff_norms",
            "target_norms",
            "sampled_sup_gap",
            "zero_load_internal",
            "base_seed",
            "stream_index",
        ],
    );
    let mut const_t = Table::new("constants", &["d", "alpha", "latala_C", "base_seed", "stream_index"]);
    let mut layers_t = Table::new(
        "layers",
        &[
            "d",
            "alpha",
            "scheme",
            "layer",
            "prune_count",
            "mean_target_norm",
            "mean_diff_norm",
            "q95_diff_norm",
            "bound",
            "c2_bound",
            "frac_within_bound",
            "event_threshold",
            "frac_event",
            "frac_zero_load",
            "bib_rows",
            "bib_cols",
        ],
    );
    let mut gaps_t = Table::new(
        "gaps",
        &["d", "alpha", "scheme", "median_gap", "mean_gap", "q90_gap", "max_gap", "control_gap"],
    );

    let order = ordered_widths(&p.widths);
    // medians[alpha][scheme] in increasing d.
    let mut medians = vec![vec![Vec::new(); p.schemes.len()]; p.alphas.len()];
    for &(di, d) in &order {
        let trials: Vec<FcnTrial> = (0..p.trials)
            .into_par_iter()
            .map(|t| fcn_trial(p, d, row_seed(seed, di, t)))
            .collect::<Result<_>>()?;
        let control_gap = trials[0].control_gap;
        let s0 = row_seed(seed, di, 0);
        trials_t.push(vec![
            d.into(),
            Cell::Empty,
            "control".into(),
            0usize.into(),
            as_f64(&vec![0; l]).into(),
            vec![0.0; l].into(),
            trials[0].target_norms.clone().into(),
            control_gap.into(),
            Cell::Empty,
            s0.base_seed.into(),
            s0.stream_index.into(),
        ]);
        report.check(
            format!("fcn d={d}: all-ones mask gives zero gap"),
            control_gap == 0.0,
            format!("gap {control_gap}"),
        );
        for (ai, &alpha) in p.alphas.iter().enumerate() {
            let ls = SeedSpec::new(seed, LATALA_STREAM | ((di as u64) << 16) | ai as u64);
            let c_hat = estimate_latala(d, LatalaDist::Normal1, Some(alpha), p.latala_trials, ls)?.c;
            const_t.push(vec![d.into(), alpha.into(), c_hat.into(), ls.base_seed.into(), ls.stream_index.into()]);
            for (si, &scheme) in p.schemes.iter().enumerate() {
                let outs: Vec<&FcnOutcome> = trials.iter().map(|t| &t.outcomes[ai][si]).collect();
                for (t, (o, tr)) in outs.iter().zip(&trials).enumerate() {
                    let s = row_seed(seed, di, t);
                    trials_t.push(vec![
                        d.into(),
                        alpha.into(),
                        scheme.as_str().into(),
                        t.into(),
                        as_f64(&o.counts).into(),
                        o.diff_norms.clone().into(),
                        tr.target_norms.clone().into(),
                        o.gap.into(),
                        o.zero_load.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect::<Vec<_>>().into(),
                        s.base_seed.into(),
                        s.stream_index.into(),
                    ]);
                }
                let gaps: Vec<f64> = outs.iter().map(|o| o.gap).collect();
                let med = median(&gaps);
                medians[ai][si].push((d, med));
                gaps_t.push(vec![
                    d.into(),
                    alpha.into(),
                    scheme.as_str().into(),
                    med.into(),
                    mean(&gaps).into(),
                    quantile(&gaps, 0.9).into(),
                    gaps.iter().copied().fold(0.0, f64::max).into(),
                    control_gap.into(),
                ]);
                let (bound, c2, threshold) = fcn_bounds(scheme, c_hat, p.weight_scale, d, alpha);
                for k in 1..l - 1 {
                    let diffs: Vec<f64> = outs.iter().map(|o| o.diff_norms[k]).collect();
                    let targets: Vec<f64> = trials.iter().map(|t| t.target_norms[k]).collect();
                    let n = diffs.len() as f64;
                    let frac_within = diffs.iter().filter(|&&x| x <= bound).count() as f64 / n;
                    let frac_event = diffs.iter().filter(|&&x| x <= threshold).count() as f64 / n;
                    let frac_zero = outs.iter().filter(|o| o.zero_load[k - 1]).count() as f64 / n;
                    let count = outs[0].counts[k];
                    let (bib_r, bib_c) = balls_in_bins_precondition(d, d, count);
                    let mean_diff = mean(&diffs);
                    layers_t.push(vec![
                        d.into(),
                        alpha.into(),
                        scheme.as_str().into(),
                        (k + 1).into(),
                        count.into(),
                        mean(&targets).into(),
                        mean_diff.into(),
                        quantile(&diffs, 0.95).into(),
                        bound.into(),
                        (c2 * if scheme.is_random() {
                            (d as f64).powf(-alpha / 2.0)
                        } else {
                            (d as f64).powf(-2.0 * alpha)
                        })
                        .into(),
                        frac_within.into(),
                        threshold.into(),
                        frac_event.into(),
                        frac_zero.into(),
                        bib_r.into(),
                        bib_c.into(),
                    ]);
                    let tag = format!("fcn {} alpha={alpha} d={d} layer {}", scheme.as_str(), k + 1);
                    report.check(
                        format!("{tag}: mean diff norm within bound"),
                        mean_diff <= bound,
                        format!("mean {mean_diff} vs bound {bound}"),
                    );
                    report.check(
                        format!("{tag}: diff norm within bound in at least {} of trials", p.bound_fraction),
                        frac_within >= p.bound_fraction,
                        format!("fraction {frac_within}"),
                    );
                }
            }
        }
    }
    if order.len() >= 2 {
        for (ai, &alpha) in p.alphas.iter().enumerate() {
            for (si, scheme) in p.schemes.iter().enumerate() {
                let m = &medians[ai][si];
                let vals: Vec<f64> = m.iter().map(|x| x.1).collect();
                report.check(
                    format!("fcn {} alpha={alpha}: median gap strictly decreasing in d", scheme.as_str()),
                    strictly_decreasing(&vals),
                    format!("{m:?}"),
                );
            }
        }
    }
    report.tables.extend([trials_t, gaps_t, layers_t, const_t]);
    Ok(())
}

// ---- CNN ----

struct ConvNorms {
    dft: f64,
    explicit: Option<f64>,
}

struct CnnTrial {
    counts: Vec<usize>,
    /// Conv layers by DFT, then the dense layer.
    target: Vec<ConvNorms>,
    diff: Vec<ConvNorms>,
    /// `‖F[:,:,i,j]‖` per conv layer, row-major over `(i, j)`.
    slice_norms: Vec<Vec<f64>>,
    /// `‖K̄[:,:,i,j]‖` of the pruned-out filters per conv layer.
    pruned_slice_norms: Vec<Vec<f64>>,
    gap: f64,
}

fn conv_norms(f: &ConvTensor, p: &CnnSweepParams) -> Result<ConvNorms> {
    let k = pad_kernel(f, p.spatial)?;
    let dft = spectral_norm_via_dft(&k)?;
    let p2 = p.spatial * p.spatial;
    let explicit = if p2 * f.out_channels().max(f.in_channels()) <= p.explicit_limit {
        Some(norm(&build_full_map(&k))?)
    } else {
        None
    };
    Ok(ConvNorms { dft, explicit })
}

fn slice_norms(f: &ConvTensor) -> Result<Vec<f64>> {
    let q = f.kernel();
    let mut out = Vec::with_capacity(q * q);
    for i in 0..q {
        for j in 0..q {
            out.push(norm(&f.tap_matrix(i, j))?);
        }
    }
    Ok(out)
}

fn cnn_channels(p: &CnnSweepParams, d: usize) -> Vec<usize> {
    let mut c = vec![p.input_channels];
    c.extend(std::iter::repeat_n(d, p.depth - 1));
    c
}

fn cnn_model(p: &CnnSweepParams, d: usize, s: SeedSpec) -> Result<CnnModel> {
    let dist = DistributionSpec::xavier_uniform(p.weight_scale);
    CnnModel::sample(
        &cnn_channels(p, d),
        p.output_dim,
        p.spatial,
        p.kernel,
        p.activation,
        &dist,
        s.child(0),
    )
}

fn cnn_trial(p: &CnnSweepParams, d: usize, alpha: f64, s: SeedSpec) -> Result<CnnTrial> {
    let net = Network::Cnn(cnn_model(p, d, s)?);
    let (mask, counts) = if alpha == 0.0 {
        let Network::Cnn(m) = &net else { unreachable!() };
        (MaskSet::all_ones_cnn(m), vec![0; p.depth])
    } else {
        let spec = PruneSpec {
            scheme: PruneScheme::FilterRandom,
            amount: PruneAmount::Alpha(alpha),
            seed: Some(s.child(1)),
        };
        (build_mask(&spec, &net)?, layer_counts(&spec, &net)?)
    };
    let pruned = net.pruned(&mask)?;
    let Network::Cnn(m) = &net else { unreachable!() };
    let mut target = Vec::new();
    let mut diff = Vec::new();
    let mut slices = Vec::new();
    let mut pruned_slices = Vec::new();
    for (f, lm) in m.convs().iter().zip(mask.layers()) {
        let LayerMask::Filter(fm) = lm else { unreachable!() };
        let removed = f.with_filters_zeroed(|s, t| fm.get(s, t) == 0.0);
        target.push(conv_norms(f, p)?);
        diff.push(conv_norms(&removed, p)?);
        slices.push(slice_norms(f)?);
        pruned_slices.push(slice_norms(&removed)?);
    }
    target.push(ConvNorms {
        dft: norm(m.dense())?,
        explicit: None,
    });
    diff.push(ConvNorms {
        dft: 0.0,
        explicit: None,
    });
    let gap = estimate_sup_gap(&net, &pruned, Domain::Cube, p.samples, s.child(2))?.sup;
    Ok(CnnTrial {
        counts,
        target,
        diff,
        slice_norms: slices,
        pruned_slice_norms: pruned_slices,
        gap,
    })
}

/// The unpruned model of trial 0 at the first listed width, exactly as the
/// sweep samples it. `None` for kinds that build no network.
pub fn snapshot_model(config: &ResolvedConfig) -> Result<Option<Network>> {
    let s = row_seed(config.seed, 0, 0);
    match &config.params {
        Params::FcnGapSweep(p) => Ok(Some(Network::Fcn(fcn_model(p, p.widths[0], s)?))),
        Params::CnnGapSweep(p) => Ok(Some(Network::Cnn(cnn_model(p, p.widths[0], s)?))),
        _ => Ok(None),
    }
}

fn mean_columns(rows: &[&Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

/// Filter-pruning sweep over CNN channel widths on the unit cube.
pub fn run_cnn_gap_sweep(p: &CnnSweepParams, seed: u64, report: &mut Report) -> Result<()> {
    for &alpha in &p.alphas {
        for &d in &p.widths {
            let max = thm3_alpha_constraint(d)?;
            if !(alpha > 0.0 && alpha <= max) {
                return Err(Error::InadmissibleAlpha(format!(
                    "alpha={alpha} is outside (0, {max}] at d={d} for filter pruning"
                )));
            }
        }
        if !(p.beta2 < alpha / 4.0) {
            report.note(format!("beta2={} is not below alpha/4={} for alpha={alpha}", p.beta2, alpha / 4.0));
        }
    }
    report.note(GAP_NOTE);
    report.note("inputs are drawn from the unit cube");
    report.note("conv layer norms use the DFT blocks; explicit_* columns use the full circulant map when it is small enough, empty otherwise");
    report.note("C3 = p max_ij mean ||F[:,:,i,j]||, C4 = p d^(alpha/4) max_ij mean ||Kbar[:,:,i,j]|| over internal conv layers, C5 = p mean ||W_l||");
    let l = p.depth;
    let pf = p.spatial as f64;
    let qf = p.kernel as f64;
    let mut trials_t = Table::new(
        "trials",
        &[
            "d",
            "alpha",
            "trial",
            "prune_counts",
            "target_norms",
            "diff_norms",
            "explicit_target_norms",
            "explicit_diff_norms",
            "sampled_sup_gap",
            "base_seed",
            "stream_index",
        ],
    );
    let mut layers_t = Table::new(
        "layers",
        &[
            "d",
            "alpha",
            "layer",
            "prune_count",
            "mean_target_norm",
            "mean_diff_norm",
            "c3_layer",
            "c3_q2_over_p",
            "scaling_holds",
        ],
    );
    let mut summary_t = Table::new(
        "summary",
        &[
            "d",
            "alpha",
            "median_gap",
            "mean_gap",
            "max_gap",
            "control_gap",
            "C3",
            "C4",
            "C5",
            "gap_rhs",
            "probability",
            "non_vacuous",
            "max_alpha",
        ],
    );
    let order = ordered_widths(&p.widths);
    let mut medians = vec![Vec::new(); p.alphas.len()];
    let mut worst_rel = 0.0f64;
    let mut compared = 0usize;
    for &(di, d) in &order {
        let s0 = row_seed(seed, di, 0);
        let control = cnn_trial(p, d, 0.0, s0)?;
        report.check(
            format!("cnn d={d}: pruning no filters gives zero gap"),
            control.gap == 0.0,
            format!("gap {}", control.gap),
        );
        trials_t.push(vec![
            d.into(),
            0.0.into(),
            0usize.into(),
            as_f64(&control.counts).into(),
            control.target.iter().map(|n| n.dft).collect::<Vec<_>>().into(),
            vec![0.0; l].into(),
            Cell::Empty,
            Cell::Empty,
            control.gap.into(),
            s0.base_seed.into(),
            s0.stream_index.into(),
        ]);
        for (ai, &alpha) in p.alphas.iter().enumerate() {
            let trials: Vec<CnnTrial> = (0..p.trials)
                .into_par_iter()
                .map(|t| cnn_trial(p, d, alpha, row_seed(seed, di, t)))
                .collect::<Result<_>>()?;
            for (t, tr) in trials.iter().enumerate() {
                let s = row_seed(seed, di, t);
                let explicit = |v: &[ConvNorms]| -> Cell {
                    let e: Vec<f64> = v[..l - 1].iter().filter_map(|n| n.explicit).collect();
                    if e.len() == l - 1 {
                        Cell::List(e)
                    } else {
                        Cell::Empty
                    }
                };
                for n in tr.target.iter().chain(&tr.diff) {
                    if let Some(e) = n.explicit {
                        let rel = (n.dft - e).abs() / e.max(f64::MIN_POSITIVE);
                        let rel = if e == 0.0 && n.dft == 0.0 { 0.0 } else { rel };
                        worst_rel = worst_rel.max(rel);
                        compared += 1;
                    }
                }
                trials_t.push(vec![
                    d.into(),
                    alpha.into(),
                    t.into(),
                    as_f64(&tr.counts).into(),
                    tr.target.iter().map(|n| n.dft).collect::<Vec<_>>().into(),
                    tr.diff.iter().map(|n| n.dft).collect::<Vec<_>>().into(),
                    explicit(&tr.target),
                    explicit(&tr.diff),
                    tr.gap.into(),
                    s.base_seed.into(),
                    s.stream_index.into(),
                ]);
            }
            let mut c3: f64 = 0.0;
            let mut c4: f64 = 0.0;
            for k in 0..l - 1 {
                let slices: Vec<&Vec<f64>> = trials.iter().map(|t| &t.slice_norms[k]).collect();
                let c3_layer = pf * max_of(&mean_columns(&slices));
                c3 = c3.max(c3_layer);
                if k >= 1 {
                    let ps: Vec<&Vec<f64>> = trials.iter().map(|t| &t.pruned_slice_norms[k]).collect();
                    c4 = c4.max(pf * (d as f64).powf(alpha / 4.0) * max_of(&mean_columns(&ps)));
                }
                let targets: Vec<f64> = trials.iter().map(|t| t.target[k].dft).collect();
                let diffs: Vec<f64> = trials.iter().map(|t| t.diff[k].dft).collect();
                let mean_target = mean(&targets);
                let rhs = c3_layer * qf * qf / pf;
                let holds = mean_target <= rhs;
                report.check(
                    format!("cnn alpha={alpha} d={d} layer {}: mean norm within C3 q^2/p", k + 1),
                    holds,
                    format!("mean {mean_target} vs {rhs}"),
                );
                layers_t.push(vec![
                    d.into(),
                    alpha.into(),
                    (k + 1).into(),
                    trials[0].counts[k].into(),
                    mean_target.into(),
                    mean(&diffs).into(),
                    c3_layer.into(),
                    rhs.into(),
                    holds.into(),
                ]);
            }
            let dense: Vec<f64> = trials.iter().map(|t| t.target[l - 1].dft).collect();
            let mean_dense = mean(&dense);
            layers_t.push(vec![
                d.into(),
                alpha.into(),
                l.into(),
                0usize.into(),
                mean_dense.into(),
                0.0.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ]);
            let c5 = pf * mean_dense;
            let gaps: Vec<f64> = trials.iter().map(|t| t.gap).collect();
            let med = median(&gaps);
            medians[ai].push((d, med));
            let rhs = thm3_rhs(pf, d as f64, p.p0, p.activation.lipschitz(), l, p.beta1, p.beta2)?;
            let prob = thm3_probability(l, d as f64, pf, qf, alpha, p.beta1, p.beta2, c3, c4, c5)?;
            summary_t.push(vec![
                d.into(),
                alpha.into(),
                med.into(),
                mean(&gaps).into(),
                max_of(&gaps).into(),
                control.gap.into(),
                c3.into(),
                c4.into(),
                c5.into(),
                rhs.into(),
                prob.value.into(),
                prob.non_vacuous.into(),
                thm3_alpha_constraint(d)?.into(),
            ]);
        }
    }
    if compared > 0 {
        report.check(
            "cnn: DFT layer norms equal explicit-matrix norms",
            worst_rel <= p.rel_tol,
            format!("{compared} comparisons, max rel error {worst_rel:e}"),
        );
    }
    if order.len() >= 2 {
        for (ai, &alpha) in p.alphas.iter().enumerate() {
            let vals: Vec<f64> = medians[ai].iter().map(|x| x.1).collect();
            report.check(
                format!("cnn alpha={alpha}: median gap strictly decreasing in d"),
                strictly_decreasing(&vals),
                format!("{:?}", medians[ai]),
            );
        }
    }
    report.tables.extend([trials_t, summary_t, layers_t]);
    Ok(())
}
