//! Experiment orchestration: config ingestion, dispatch and report emission.
//!
//! Every kind resolves its config (filling defaults), runs on seed streams
//! derived only from the config, and produces a [`Report`] with no timings,
//! so equal configs give byte-identical reports at any thread count.

mod config;
mod experiments;
mod report;
mod sweeps;

pub use config::{
    BallsBinsParams, BinsConfig, BoundsParams, CirculantParams, CnnBoundParams, CnnSweepParams, ExperimentConfig,
    ExperimentKind, FcnSweepParams, OracleSuiteParams, OrderStatConfig, OrderStatsParams, Params, ResolvedConfig,
    Table2Params, Table2Row, Table3Params, Table3Row, DEFAULT_SEED,
};
pub use report::{Cell, Check, OutputFormat, Report, Table};
pub use sweeps::{run_cnn_gap_sweep, run_fcn_gap_sweep, snapshot_model};

use crate::error::Result;

/// Runs a resolved experiment.
pub fn run(config: &ResolvedConfig) -> Result<Report> {
    let mut report = Report::new(config.kind.as_str(), config.header());
    let seed = config.seed;
    match &config.params {
        Params::Table2(p) => experiments::run_table2(p, seed, &mut report)?,
        Params::Table3(p) => experiments::run_table3(p, seed, &mut report)?,
        Params::OrderStats(p) => experiments::run_order_stats(p, seed, &mut report)?,
        Params::BallsBins(p) => experiments::run_balls_bins(p, seed, &mut report)?,
        Params::CirculantEquiv(p) => experiments::run_circulant(p, seed, &mut report)?,
        Params::FcnGapSweep(p) => run_fcn_gap_sweep(p, seed, &mut report)?,
        Params::CnnGapSweep(p) => run_cnn_gap_sweep(p, seed, &mut report)?,
        Params::Bounds(p) => experiments::run_bounds(p, seed, &mut report)?,
        Params::OracleSuite(p) => experiments::run_oracle_suite(p, seed, &mut report)?,
    }
    Ok(report)
}

/// Parses, resolves and runs a JSON config document.
pub fn run_json(doc: &str) -> Result<Report> {
    run(&ExperimentConfig::from_json(doc)?.resolve()?)
}

/// Process exit code for a finished report: 0 when every check passed,
/// 2 otherwise.
pub fn exit_code(report: &Report) -> i32 {
    if report.all_passed() {
        0
    } else {
        2
    }
}
