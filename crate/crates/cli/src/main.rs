use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use probprune_core::harness::{self, snapshot_model, ExperimentConfig};
use probprune_core::{Error, Result};

/// Worker-count override. Changes speed only, never results.
const WORKERS_ENV: &str = "PROBPRUNE_WORKERS";

#[derive(Parser)]
#[command(name = "probprune", version, about = "Prune random FCNs and CNNs and check the bounds by Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantiles of the normalized norm of pruned random matrices
    Table2(Common),
    /// Latala-type norm estimates for uniform and normal entries
    Table3(Common),
    /// Exact and Monte Carlo moments of uniform order statistics
    OrderStats(Common),
    /// Exact and Monte Carlo balls-into-bins tail probabilities
    BallsBins(Common),
    /// Direct convolution vs circulant map, DFT norm vs explicit SVD
    CirculantEquiv(Common),
    /// Pruned-vs-target gap of random FCNs over a width sweep
    FcnSweep(Sweep),
    /// Pruned-vs-target gap of random CNNs over a channel sweep
    CnnSweep(Sweep),
    /// Evaluate the width, probability and gap bound formulas
    Bounds(Common),
    /// Closed-form anchors and cross-checks of every estimator
    OracleSuite(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config document; `kind` may be omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the experiment's main trial count
    #[arg(long)]
    trials: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Clone)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    /// Also write the trial-0 target model of the first width as JSON
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common, Option<&Path>) {
        match self {
            Command::Table2(c) => ("table2", c, None),
            Command::Table3(c) => ("table3", c, None),
            Command::OrderStats(c) => ("order-stats", c, None),
            Command::BallsBins(c) => ("balls-bins", c, None),
            Command::CirculantEquiv(c) => ("circulant-equiv", c, None),
            Command::FcnSweep(s) => ("fcn-gap-sweep", &s.common, s.snapshot.as_deref()),
            Command::CnnSweep(s) => ("cnn-gap-sweep", &s.common, s.snapshot.as_deref()),
            Command::Bounds(c) => ("bounds", c, None),
            Command::OracleSuite(c) => ("oracle-suite", c, None),
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Merges the config file (if any) with the flags; flags win.
fn build_config(kind: &str, c: &Common) -> Result<ExperimentConfig> {
    let mut doc = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => serde_json::json!({}),
    };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| config_error("config must be a JSON object"))?;

    let wanted: harness::ExperimentKind = serde_json::from_value(kind.into()).expect("known kind");
    if let Some(given) = obj.get("kind") {
        let given: harness::ExperimentKind =
            serde_json::from_value(given.clone()).map_err(|e| config_error(format!("kind: {e}")))?;
        if given != wanted {
            return Err(config_error(format!(
                "config is for `{}` but the subcommand runs `{}`",
                given.as_str(),
                wanted.as_str()
            )));
        }
    }
    obj.insert("kind".into(), kind.into());
    if let Some(seed) = c.seed {
        obj.insert("seed".into(), seed.into());
    }
    if let Some(trials) = c.trials {
        obj.insert("trials".into(), trials.into());
    }
    if let Some(out) = &c.out {
        obj.insert("out".into(), out.to_string_lossy().into_owned().into());
    }
    if let Some(f) = c.format {
        let f = match f {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        obj.insert("format".into(), f.into());
    }
    ExperimentConfig::from_json(&doc.to_string())
}

fn init_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_error(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(e.to_string()))
}

fn write_to(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<i32> {
    init_workers()?;
    let (kind, common, snapshot) = cli.command.parts();
    let resolved = build_config(kind, common)?.resolve()?;

    if let Some(path) = snapshot {
        if let Some(model) = snapshot_model(&resolved)? {
            write_to(path, &model.to_json()?)?;
        }
    }

    let report = harness::run(&resolved)?;
    let text = report.render(resolved.format)?;
    match &resolved.out {
        Some(path) => write_to(path, &text)?,
        None => print!("{text}"),
    }
    for c in report.failed_checks() {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    Ok(harness::exit_code(&report))
}

fn main() -> ExitCode {
    // Usage errors are config errors (exit 1); clap alone would exit 2,
    // which is reserved for failed checks.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = run(&cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
