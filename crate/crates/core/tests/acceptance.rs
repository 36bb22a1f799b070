//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every experiment runs twice, under rayon pools of 1 and 8 workers. The
//! criterion itself is judged on the 8-worker report; criterion 9 compares
//! the rendered bytes of the two runs.

use std::time::{Duration, Instant};

use probprune_core::harness::{self, Cell, ExperimentConfig, ExperimentKind, Report, Table};
use probprune_core::theory::thm3_alpha_constraint;

struct Run {
    report: Report,
    /// Wall time of the single-worker run.
    serial: Duration,
    identical: bool,
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn run(kind: ExperimentKind) -> Run {
    let cfg = ExperimentConfig::new(kind).resolve().expect("default config resolves");
    let start = Instant::now();
    let one = in_pool(1, || harness::run(&cfg)).expect("run with 1 worker");
    let serial = start.elapsed();
    let eight = in_pool(8, || harness::run(&cfg)).expect("run with 8 workers");
    let identical =
        one.to_csv() == eight.to_csv() && one.to_json().unwrap() == eight.to_json().unwrap();
    Run {
        report: eight,
        serial,
        identical,
    }
}

fn f(t: &Table, row: usize, col: &str) -> f64 {
    t.get(row, col).and_then(Cell::as_f64).unwrap_or_else(|| panic!("{}[{row}].{col}", t.name))
}

fn flag(t: &Table, row: usize, col: &str) -> Option<bool> {
    match t.get(row, col) {
        Some(Cell::Bool(b)) => Some(*b),
        _ => None,
    }
}

fn text<'a>(t: &'a Table, row: usize, col: &str) -> &'a str {
    match t.get(row, col) {
        Some(Cell::Text(s)) => s,
        other => panic!("{}[{row}].{col} is {other:?}", t.name),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within_budget(run: &Run, budget: Duration, problems: &mut Vec<String>) {
    if run.serial > budget {
        problems.push(format!("took {:.1?}, budget {budget:?}", run.serial));
    }
}

fn criterion1(run: &Run) -> Outcome {
    let t = run.report.table("table2").expect("table2");
    let want = [
        (32usize, 1.0f64, 1.087, 1.15),
        (32, 3f64.sqrt(), 1.882, 1.996),
        (128, 1.0, 1.131, 1.159),
        (512, 3f64.sqrt(), 1.985, 2.006),
    ];
    let mut problems = Vec::new();
    let mut seen = Vec::new();
    for (n, k, mean, c0) in want {
        let row = (0..t.rows.len()).find(|&r| {
            f(t, r, "n1") as usize == n && f(t, r, "n2") as usize == n && (f(t, r, "K") - k).abs() < 1e-12 && f(t, r, "q") == 0.95
        });
        let Some(r) = row else {
            problems.push(format!("row ({n},{n},{k:.3}) missing"));
            continue;
        };
        let (m, c) = (f(t, r, "mean"), f(t, r, "c0"));
        seen.push(format!("{n}/{k:.2}: mean {m:.4} c0 {c:.4}"));
        if rel(m, mean) > 0.02 {
            problems.push(format!("({n},{k:.3}) mean {m} vs {mean}"));
        }
        if rel(c, c0) > 0.03 {
            problems.push(format!("({n},{k:.3}) c0 {c} vs {c0}"));
        }
        let delta0 = -((1.0f64 - 0.95) / 2.0).ln() / (4.0 * n as f64);
        if round3(f(t, r, "delta0")) != round3(delta0) {
            problems.push(format!("({n},{k:.3}) delta0 {} vs {delta0}", f(t, r, "delta0")));
        }
    }
    let d32 = -((1.0f64 - 0.95) / 2.0).ln() / 128.0;
    if round3(d32) != 0.029 {
        problems.push(format!("closed-form delta0 at n=32 is {d32}"));
    }
    within_budget(run, Duration::from_secs(120), &mut problems);
    outcome(problems.is_empty(), if problems.is_empty() { seen.join("; ") } else { problems.join("; ") })
}

fn criterion2(run: &Run) -> Outcome {
    let t = run.report.table("table3").expect("table3");
    let want = [(32usize, "uniform", None, 0.596), (512, "normal-1", None, 0.598), (256, "normal-1", Some(0.5), 0.592)];
    let mut problems = Vec::new();
    let mut seen = Vec::new();
    for (d, dist, alpha, c) in want {
        let row = (0..t.rows.len()).find(|&r| {
            f(t, r, "d") as usize == d
                && text(t, r, "dist") == dist
                && t.get(r, "alpha").and_then(Cell::as_f64) == alpha
        });
        let Some(r) = row else {
            problems.push(format!("row d={d} {dist} alpha={alpha:?} missing"));
            continue;
        };
        let got = f(t, r, "C");
        seen.push(format!("{d} {dist}{}: C {got:.4}", alpha.map_or(String::new(), |a| format!(" a={a}"))));
        if rel(got, c) > 0.03 {
            problems.push(format!("d={d} {dist}: C {got} vs {c}"));
        }
    }
    within_budget(run, Duration::from_secs(300), &mut problems);
    outcome(problems.is_empty(), if problems.is_empty() { seen.join("; ") } else { problems.join("; ") })
}

fn criterion3() -> (Outcome, bool) {
    let a = thm3_alpha_constraint(128).unwrap();
    let b = thm3_alpha_constraint(1024).unwrap();
    let r4 = |x: f64| (x * 1e4).round() / 1e4;
    let again = in_pool(8, || (thm3_alpha_constraint(128).unwrap(), thm3_alpha_constraint(1024).unwrap()));
    let same = again.0.to_bits() == a.to_bits() && again.1.to_bits() == b.to_bits();
    (outcome(r4(a) == 0.6729 && r4(b) == 0.7205, format!("d=128: {a:.6}, d=1024: {b:.6}")), same)
}

fn criterion4(run: &Run) -> Outcome {
    let t = run.report.table("order-stats").expect("order-stats table");
    let mut problems = Vec::new();
    if t.rows.len() != 20 {
        problems.push(format!("{} configurations, want 20", t.rows.len()));
    }
    let (mut ns, mut ps) = (Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    for r in 0..t.rows.len() {
        let (n, rr) = (f(t, r, "n") as u64, f(t, r, "r") as u64);
        ns.push(n);
        ps.push(f(t, r, "p") as u32);
        if !(1..=n).contains(&rr) {
            problems.push(format!("r={rr} outside 1..={n}"));
        }
        let z = f(t, r, "z").abs();
        worst = worst.max(z);
        if z > 3.0 {
            problems.push(format!("n={n} r={rr}: |z| = {z:.2}"));
        }
        if flag(t, r, "specialization_matches") != Some(true) {
            problems.push(format!("n={n} r={rr}: rational specialization mismatch"));
        }
    }
    let trials = run.report.config["params"]["trials"].as_u64();
    if trials != Some(100_000) {
        problems.push(format!("trials {trials:?}"));
    }
    if ns.iter().min() != Some(&4) || ns.iter().max() != Some(&4096) || !ps.contains(&1) || !ps.contains(&2) {
        problems.push("configurations do not span n in 4..4096 and p in {1,2}".into());
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() { format!("20 configs, max |z| = {worst:.2}") } else { problems.join("; ") },
    )
}

fn criterion5(run: &Run) -> Outcome {
    let mut problems = Vec::new();
    let te = run.report.table("balls-bins-exact").expect("exact table");
    let r = (0..te.rows.len()).find(|&r| f(te, r, "bins") == 4.0 && f(te, r, "balls") == 8.0);
    let mut detail = Vec::new();
    match r {
        Some(r) => {
            let (fav, total) = (f(te, r, "favorable"), f(te, r, "total"));
            if total != 65_536.0 || total - fav != 100.0 {
                problems.push(format!("exact {fav}/{total}"));
            }
            let (pe, mc, se) = (f(te, r, "exact"), f(te, r, "mc"), f(te, r, "std_err"));
            if (mc - pe).abs() > 3.0 * se && !(se == 0.0 && mc == pe) {
                problems.push(format!("mc {mc} vs exact {pe} (se {se})"));
            }
            detail.push(format!("P = 1 - {}/65536, mc {mc:.5}", total - fav));
        }
        None => problems.push("n=4 N=8 missing".into()),
    }
    let tg = run.report.table("balls-bins-guarantee").expect("guarantee table");
    for n in [32usize, 64] {
        let Some(r) = (0..tg.rows.len()).find(|&r| f(tg, r, "bins") as usize == n) else {
            problems.push(format!("n={n} missing"));
            continue;
        };
        let balls = f(tg, r, "balls") as usize;
        let want_balls = (n as f64 * (n as f64).ln()).ceil() as usize;
        let (mc, g) = (f(tg, r, "mc"), 1.0 - (n as f64).powf(-1.0 / 3.0));
        if balls != want_balls {
            problems.push(format!("n={n}: N={balls}, want {want_balls}"));
        }
        if mc < g {
            problems.push(format!("n={n}: {mc} < {g}"));
        }
        detail.push(format!("n={n}: {mc:.4} >= {g:.4}"));
    }
    if run.report.config["params"]["trials"].as_u64() != Some(10_000) {
        problems.push("trials is not 10^4".into());
    }
    outcome(problems.is_empty(), if problems.is_empty() { detail.join("; ") } else { problems.join("; ") })
}

fn criterion6(run: &Run) -> Outcome {
    let t = run.report.table("circulant-equiv").expect("circulant table");
    let mut problems = Vec::new();
    let (mut abs, mut relm) = (0.0f64, 0.0f64);
    for r in 0..t.rows.len() {
        let (dout, din, p, q) = (f(t, r, "d_out"), f(t, r, "d_in"), f(t, r, "p"), f(t, r, "q"));
        if dout > 3.0 || din > 3.0 || p > 8.0 || q >= p {
            problems.push(format!("instance {r} outside the sampled ranges"));
        }
        abs = abs.max(f(t, r, "conv_max_abs_err"));
        relm = relm.max(rel(f(t, r, "dft_norm"), f(t, r, "explicit_norm")));
    }
    if t.rows.len() != 50 {
        problems.push(format!("{} instances", t.rows.len()));
    }
    if abs >= 1e-12 {
        problems.push(format!("conv error {abs:e}"));
    }
    if relm >= 1e-8 {
        problems.push(format!("norm rel error {relm:e}"));
    }
    within_budget(run, Duration::from_secs(10), &mut problems);
    outcome(
        problems.is_empty(),
        if problems.is_empty() { format!("50 instances, conv err {abs:.1e}, norm rel err {relm:.1e}") } else { problems.join("; ") },
    )
}

fn strictly_decreasing(xs: &[(f64, f64)]) -> bool {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v.windows(2).all(|w| w[1].1 < w[0].1)
}

fn criterion7(run: &Run) -> Outcome {
    let gaps = run.report.table("gaps").expect("gaps");
    let layers = run.report.table("layers").expect("layers");
    let mut problems = Vec::new();
    let mut detail = Vec::new();
    for scheme in ["magnitude-layerwise", "random-with-replacement"] {
        let med: Vec<(f64, f64)> = (0..gaps.rows.len())
            .filter(|&r| text(gaps, r, "scheme") == scheme)
            .map(|r| (f(gaps, r, "d"), f(gaps, r, "median_gap")))
            .collect();
        if med.len() != 3 || !strictly_decreasing(&med) {
            problems.push(format!("{scheme}: medians {med:?}"));
        }
        for r in (0..gaps.rows.len()).filter(|&r| text(gaps, r, "scheme") == scheme) {
            if f(gaps, r, "control_gap") != 0.0 {
                problems.push(format!("{scheme}: control gap nonzero"));
            }
        }
        let rows: Vec<usize> = (0..layers.rows.len()).filter(|&r| text(layers, r, "scheme") == scheme).collect();
        let mut worst_frac: f64 = 1.0;
        for &r in &rows {
            let (m, b, frac) = (f(layers, r, "mean_diff_norm"), f(layers, r, "bound"), f(layers, r, "frac_within_bound"));
            worst_frac = worst_frac.min(frac);
            if m > b || frac < 0.95 {
                problems.push(format!("{scheme} d={} layer {}: mean {m:.3e} bound {b:.3e} frac {frac}", f(layers, r, "d"), f(layers, r, "layer")));
            }
        }
        detail.push(format!(
            "{scheme}: medians {}, min frac within {worst_frac}",
            med.iter().map(|(_, m)| format!("{m:.2e}")).collect::<Vec<_>>().join(" > ")
        ));
        if rows.len() != 3 * 2 {
            problems.push(format!("{scheme}: {} layer rows, want 6", rows.len()));
        }
    }
    within_budget(run, Duration::from_secs(600), &mut problems);
    outcome(problems.is_empty(), if problems.is_empty() { detail.join("; ") } else { problems.join("; ") })
}

fn criterion8(run: &Run) -> Outcome {
    let s = run.report.table("summary").expect("summary");
    let layers = run.report.table("layers").expect("layers");
    let mut problems = Vec::new();
    let med: Vec<(f64, f64)> = (0..s.rows.len()).map(|r| (f(s, r, "d"), f(s, r, "median_gap"))).collect();
    if med.len() != 3 || !strictly_decreasing(&med) {
        problems.push(format!("medians {med:?}"));
    }
    if (0..s.rows.len()).any(|r| f(s, r, "control_gap") != 0.0) {
        problems.push("control gap nonzero".into());
    }
    let mut recorded = 0;
    for r in 0..layers.rows.len() {
        if let Some(holds) = flag(layers, r, "scaling_holds") {
            recorded += 1;
            let (m, rhs) = (f(layers, r, "mean_target_norm"), f(layers, r, "c3_q2_over_p"));
            if !holds || m > rhs {
                problems.push(format!("d={} layer {}: {m} > {rhs}", f(layers, r, "d"), f(layers, r, "layer")));
            }
        }
    }
    if recorded != 3 * 2 {
        problems.push(format!("{recorded} scaling records, want 6"));
    }
    if run.report.failed_checks().any(|c| c.name.contains("explicit")) {
        problems.push("DFT and explicit norms disagree".into());
    }
    within_budget(run, Duration::from_secs(600), &mut problems);
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "medians {}, {recorded} layer records within C3 q^2/p",
                med.iter().map(|(_, m)| format!("{m:.2e}")).collect::<Vec<_>>().join(" > ")
            )
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut identical: Vec<(u32, bool)> = Vec::new();

    let table2 = run(ExperimentKind::Table2);
    results.push((1, "table2 reproduction", criterion1(&table2)));
    identical.push((1, table2.identical));

    let table3 = run(ExperimentKind::Table3);
    results.push((2, "table3 reproduction", criterion2(&table3)));
    identical.push((2, table3.identical));

    let (c3, same3) = criterion3();
    results.push((3, "filter-pruning alpha constraint", c3));
    identical.push((3, same3));

    let order = run(ExperimentKind::OrderStats);
    results.push((4, "order statistics", criterion4(&order)));
    identical.push((4, order.identical));

    let bins = run(ExperimentKind::BallsBins);
    results.push((5, "balls into bins", criterion5(&bins)));
    identical.push((5, bins.identical));

    let circ = run(ExperimentKind::CirculantEquiv);
    results.push((6, "circulant equivalence", criterion6(&circ)));
    identical.push((6, circ.identical));

    let fcn = run(ExperimentKind::FcnGapSweep);
    results.push((7, "fcn pruning-gap scaling", criterion7(&fcn)));
    identical.push((7, fcn.identical));

    let cnn = run(ExperimentKind::CnnGapSweep);
    results.push((8, "cnn pruning-gap scaling", criterion8(&cnn)));
    identical.push((8, cnn.identical));

    let differing: Vec<u32> = identical.iter().filter(|(_, same)| !same).map(|(i, _)| *i).collect();
    results.push((
        9,
        "determinism across 1 and 8 workers",
        outcome(
            differing.is_empty(),
            if differing.is_empty() {
                "criteria 1-8 byte-identical".into()
            } else {
                format!("reports differ for criteria {differing:?}")
            },
        ),
    ));

    let mut failed = 0;
    for (i, name, o) in &results {
        println!("criterion {i} {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed (serial times: table2 {:.1?}, table3 {:.1?}, fcn {:.1?}, cnn {:.1?})",
        results.len() - failed,
        table2.serial,
        table3.serial,
        fcn.serial,
        cnn.serial
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
