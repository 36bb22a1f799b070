use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{LatalaDist, DEFAULT_QUANTILES};
use crate::networks::Activation;
use crate::pruning::PruneScheme;

use super::report::OutputFormat;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table2,
    Table3,
    OrderStats,
    BallsBins,
    CirculantEquiv,
    #[serde(alias = "fcn-sweep")]
    FcnGapSweep,
    #[serde(alias = "cnn-sweep")]
    CnnGapSweep,
    Bounds,
    OracleSuite,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Table3 => "table3",
            ExperimentKind::OrderStats => "order-stats",
            ExperimentKind::BallsBins => "balls-bins",
            ExperimentKind::CirculantEquiv => "circulant-equiv",
            ExperimentKind::FcnGapSweep => "fcn-gap-sweep",
            ExperimentKind::CnnGapSweep => "cnn-gap-sweep",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::OracleSuite => "oracle-suite",
        }
    }
}

/// A config document as written by the user. Only `kind` is required;
/// `params` holds the kind-specific fields, all optional.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Overrides the kind's main trial count.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub format: Option<OutputFormat>,
    /// Where to write the report; stdout when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            seed: None,
            trials: None,
            format: None,
            out: None,
            params: serde_json::Value::Null,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validates the document and fills in every default.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let params = match self.kind {
            ExperimentKind::Table2 => Params::Table2(parse(&self.params)?),
            ExperimentKind::Table3 => Params::Table3(parse(&self.params)?),
            ExperimentKind::OrderStats => Params::OrderStats(parse(&self.params)?),
            ExperimentKind::BallsBins => Params::BallsBins(parse(&self.params)?),
            ExperimentKind::CirculantEquiv => Params::CirculantEquiv(parse(&self.params)?),
            ExperimentKind::FcnGapSweep => Params::FcnGapSweep(parse(&self.params)?),
            ExperimentKind::CnnGapSweep => Params::CnnGapSweep(parse(&self.params)?),
            ExperimentKind::Bounds => Params::Bounds(parse(&self.params)?),
            ExperimentKind::OracleSuite => Params::OracleSuite(parse(&self.params)?),
        };
        let mut resolved = ResolvedConfig {
            kind: self.kind,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
            out: self.out.clone(),
            params,
        };
        if let Some(t) = self.trials {
            *resolved.params.trials_mut() = t;
        }
        resolved.params.validate()?;
        Ok(resolved)
    }
}

fn parse<T: DeserializeOwned + Default>(v: &serde_json::Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("params: {e}")))
}

/// A config with every default filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub params: Params,
}

impl ResolvedConfig {
    /// The header echoed into reports. The output path is left out: it
    /// routes the report and does not affect its content.
    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind.as_str(),
            "seed": self.seed,
            "format": self.format,
            "params": self.params.to_json(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Table2(Table2Params),
    Table3(Table3Params),
    OrderStats(OrderStatsParams),
    BallsBins(BallsBinsParams),
    CirculantEquiv(CirculantParams),
    FcnGapSweep(FcnSweepParams),
    CnnGapSweep(CnnSweepParams),
    Bounds(BoundsParams),
    OracleSuite(OracleSuiteParams),
}

impl Params {
    fn trials_mut(&mut self) -> &mut usize {
        match self {
            Params::Table2(p) => &mut p.trials,
            Params::Table3(p) => &mut p.trials,
            Params::OrderStats(p) => &mut p.trials,
            Params::BallsBins(p) => &mut p.trials,
            Params::CirculantEquiv(p) => &mut p.instances,
            Params::FcnGapSweep(p) => &mut p.trials,
            Params::CnnGapSweep(p) => &mut p.trials,
            Params::Bounds(p) => &mut p.trials,
            Params::OracleSuite(p) => &mut p.trials,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Params::Table2(p) => serde_json::to_value(p),
            Params::Table3(p) => serde_json::to_value(p),
            Params::OrderStats(p) => serde_json::to_value(p),
            Params::BallsBins(p) => serde_json::to_value(p),
            Params::CirculantEquiv(p) => serde_json::to_value(p),
            Params::FcnGapSweep(p) => serde_json::to_value(p),
            Params::CnnGapSweep(p) => serde_json::to_value(p),
            Params::Bounds(p) => serde_json::to_value(p),
            Params::OracleSuite(p) => serde_json::to_value(p),
        };
        v.expect("params serialize")
    }

    fn validate(&self) -> Result<()> {
        match self {
            Params::Table2(p) => {
                need(p.trials >= 100, "table2 needs at least 100 trials")?;
                need(!p.rows.is_empty(), "table2 needs at least one row")?;
                need(
                    p.quantiles.iter().all(|&q| q > 0.0 && q < 1.0),
                    "quantiles must lie in (0, 1)",
                )?;
                need(
                    p.rows.iter().all(|r| r.n1 > 0 && r.n2 > 0 && r.k > 0.0),
                    "table2 rows need positive n1, n2, k",
                )
            }
            Params::Table3(p) => {
                need(p.trials >= 2, "table3 needs at least 2 trials")?;
                need(!p.rows.is_empty(), "table3 needs at least one row")?;
                need(p.rows.iter().all(|r| r.d > 0), "table3 rows need positive d")?;
                need(
                    p.rows.iter().all(|r| r.dist != LatalaDist::Zero),
                    "the Latala ratio is undefined for the zero distribution",
                )
            }
            Params::OrderStats(p) => {
                need(p.trials >= 2, "order-stats needs at least 2 trials")?;
                need(p.a > 0.0, "a must be positive")?;
                need(
                    p.configs.iter().all(|c| c.r >= 1 && c.r <= c.n && c.p >= 1),
                    "order-stats configs need 1 <= r <= n and p >= 1",
                )
            }
            Params::BallsBins(p) => {
                need(p.trials >= 2, "balls-bins needs at least 2 trials")?;
                need(
                    p.exact.iter().chain(&p.guarantee).all(|c| c.bins > 0),
                    "balls-bins needs at least one bin",
                )
            }
            Params::CirculantEquiv(p) => {
                need(p.instances > 0, "circulant-equiv needs at least one instance")?;
                need(p.max_channels > 0, "max_channels must be positive")?;
                need(p.max_spatial >= 2, "max_spatial must be at least 2")?;
                need(p.abs_tol >= 0.0 && p.rel_tol >= 0.0, "tolerances must be non-negative")
            }
            Params::FcnGapSweep(p) => {
                need(p.depth >= 3, "fcn sweep needs depth >= 3")?;
                need(p.trials > 0 && p.samples > 0, "trials and samples must be positive")?;
                need(p.latala_trials >= 100, "latala_trials must be at least 100")?;
                need(p.widths.iter().all(|&d| d >= 3), "widths must be at least 3")?;
                need(p.input_dim > 0 && p.output_dim > 0, "input and output dims must be positive")?;
                need(p.weight_scale > 0.0, "weight_scale must be positive")?;
                need(!p.alphas.is_empty() && !p.schemes.is_empty(), "need at least one alpha and scheme")?;
                need(
                    !p.schemes.contains(&PruneScheme::FilterRandom),
                    "filter-random applies to the cnn sweep only",
                )?;
                need(p.bound_fraction > 0.0 && p.bound_fraction <= 1.0, "bound_fraction must lie in (0, 1]")
            }
            Params::CnnGapSweep(p) => {
                need(p.depth >= 3, "cnn sweep needs depth >= 3")?;
                need(p.trials > 0 && p.samples > 0, "trials and samples must be positive")?;
                need(p.widths.iter().all(|&d| d >= 3), "widths must be at least 3")?;
                need(p.kernel >= 1 && p.kernel < p.spatial, "need 1 <= kernel < spatial")?;
                need(p.input_channels > 0 && p.output_dim > 0, "input channels and output dim must be positive")?;
                need(p.weight_scale > 0.0, "weight_scale must be positive")?;
                need(!p.alphas.is_empty(), "need at least one alpha")?;
                need(p.beta1 > 0.0 && p.beta1 < 1.0, "beta1 must lie in (0, 1)")?;
                need(p.beta2 > 0.0, "beta2 must be positive")?;
                need(p.p0 > 0.0, "p0 must be positive")
            }
            Params::Bounds(p) => {
                need(p.trials >= 100, "bounds needs at least 100 estimation trials")?;
                need(p.depth >= 3, "bounds needs depth >= 3")?;
                need(p.width >= 3, "width must be at least 3")
            }
            Params::OracleSuite(p) => need(p.trials >= 2, "oracle-suite needs at least 2 trials"),
        }
    }
}

fn need(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table2Row {
    pub n1: usize,
    pub n2: usize,
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table2Params {
    pub rows: Vec<Table2Row>,
    pub trials: usize,
    pub quantiles: Vec<f64>,
}

impl Default for Table2Params {
    fn default() -> Self {
        let s3 = 3f64.sqrt();
        let rows = [(32, 1.0), (32, s3), (64, 1.0), (128, 1.0), (256, s3), (512, s3)]
            .into_iter()
            .map(|(n, k)| Table2Row { n1: n, n2: n, k })
            .collect();
        Table2Params {
            rows,
            trials: 1000,
            quantiles: DEFAULT_QUANTILES.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table3Row {
    pub d: usize,
    pub dist: LatalaDist,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table3Params {
    pub rows: Vec<Table3Row>,
    pub trials: usize,
}

impl Default for Table3Params {
    fn default() -> Self {
        Table3Params {
            rows: vec![
                Table3Row { d: 32, dist: LatalaDist::Uniform, alpha: None },
                Table3Row { d: 512, dist: LatalaDist::Normal1, alpha: None },
                Table3Row { d: 256, dist: LatalaDist::Normal1, alpha: Some(0.5) },
            ],
            trials: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderStatConfig {
    pub n: u64,
    pub r: u64,
    pub p: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderStatsParams {
    pub a: f64,
    pub configs: Vec<OrderStatConfig>,
    pub trials: usize,
    /// Allowed distance from the closed form, in standard errors.
    pub sigmas: f64,
}

impl Default for OrderStatsParams {
    fn default() -> Self {
        let configs = [
            (4, 1, 1),
            (4, 4, 2),
            (4, 2, 1),
            (8, 3, 2),
            (16, 1, 1),
            (16, 16, 1),
            (32, 10, 2),
            (64, 8, 1),
            (100, 10, 1),
            (128, 64, 2),
            (128, 127, 1),
            (256, 16, 1),
            (256, 200, 2),
            (512, 23, 1),
            (512, 512, 2),
            (1024, 1000, 2),
            (1024, 1, 1),
            (2048, 45, 1),
            (2048, 1024, 2),
            (4096, 4000, 2),
        ]
        .into_iter()
        .map(|(n, r, p)| OrderStatConfig { n, r, p })
        .collect();
        OrderStatsParams {
            a: 1.0,
            configs,
            trials: 100_000,
            sigmas: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsConfig {
    pub bins: usize,
    /// `⌈n ln n⌉` when absent.
    #[serde(default)]
    pub balls: Option<usize>,
}

impl BinsConfig {
    pub fn balls(&self) -> usize {
        self.balls.unwrap_or_else(|| {
            let n = self.bins as f64;
            (n * n.ln()).ceil() as usize
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallsBinsParams {
    /// Compared exactly (by enumeration) against Monte Carlo.
    pub exact: Vec<BinsConfig>,
    /// Checked against the `1 − n^{−1/3}` guarantee.
    pub guarantee: Vec<BinsConfig>,
    pub trials: usize,
    pub sigmas: f64,
}

impl Default for BallsBinsParams {
    fn default() -> Self {
        BallsBinsParams {
            exact: vec![BinsConfig { bins: 4, balls: Some(8) }],
            guarantee: vec![BinsConfig { bins: 32, balls: None }, BinsConfig { bins: 64, balls: None }],
            trials: 10_000,
            sigmas: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CirculantParams {
    pub instances: usize,
    pub max_channels: usize,
    pub max_spatial: usize,
    /// Convolution agreement, absolute.
    pub abs_tol: f64,
    /// DFT versus explicit SVD norm, relative.
    pub rel_tol: f64,
}

impl Default for CirculantParams {
    fn default() -> Self {
        CirculantParams {
            instances: 50,
            max_channels: 3,
            max_spatial: 8,
            abs_tol: 1e-12,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcnSweepParams {
    /// Internal width `d`; the net is `input_dim → d → … → d → output_dim`.
    pub widths: Vec<usize>,
    /// Number of weight layers `l`.
    pub depth: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    /// `K` of the uniform `U[−K/√n, K/√n]` weights.
    pub weight_scale: f64,
    pub alphas: Vec<f64>,
    pub schemes: Vec<PruneScheme>,
    pub trials: usize,
    /// Points on the unit sphere per trial.
    pub samples: usize,
    /// Trials of the in-run Latala estimate.
    pub latala_trials: usize,
    /// Required fraction of trials meeting the per-layer bound.
    pub bound_fraction: f64,
}

impl Default for FcnSweepParams {
    fn default() -> Self {
        FcnSweepParams {
            widths: vec![64, 128, 256],
            depth: 4,
            input_dim: 16,
            output_dim: 16,
            activation: Activation::Relu,
            weight_scale: 1.0,
            alphas: vec![0.5],
            schemes: vec![PruneScheme::MagnitudeLayerwise, PruneScheme::RandomWithReplacement],
            trials: 50,
            samples: 1000,
            latala_trials: 100,
            bound_fraction: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnSweepParams {
    /// Channel count `d` of every convolution after the first.
    pub widths: Vec<usize>,
    /// Number of layers `l` (convolutions plus the dense layer).
    pub depth: usize,
    /// Feature map side `p`.
    pub spatial: usize,
    /// Kernel side `q`.
    pub kernel: usize,
    pub input_channels: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub weight_scale: f64,
    pub alphas: Vec<f64>,
    pub trials: usize,
    /// Points of the unit cube per trial.
    pub samples: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// `p₀` of the bound.
    pub p0: f64,
    /// Explicit-matrix norms are computed when `p²·max(d, d′)` is at most this.
    pub explicit_limit: usize,
    /// Relative tolerance of the DFT versus explicit-matrix comparison.
    pub rel_tol: f64,
}

impl Default for CnnSweepParams {
    fn default() -> Self {
        CnnSweepParams {
            widths: vec![16, 32, 64],
            depth: 3,
            spatial: 8,
            kernel: 3,
            input_channels: 3,
            output_dim: 10,
            activation: Activation::Relu,
            weight_scale: 1.0,
            alphas: vec![0.6],
            trials: 30,
            samples: 1000,
            beta1: 0.5,
            beta2: 0.1,
            p0: 1.0,
            explicit_limit: 1024,
            rel_tol: 1e-8,
        }
    }
}

/// Inputs of the bound calculators. Constants left unset are estimated in
/// the run and the substitution is noted in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsParams {
    pub depth: usize,
    /// Common internal width `d`.
    pub width: usize,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    /// `L_1, …, L_{l−1}`; all 1 when absent.
    pub lipschitz: Option<Vec<f64>>,
    /// Weight scale `K`.
    pub k: f64,
    pub c0: Option<f64>,
    pub delta0: Option<f64>,
    /// Latala constant; the in-run estimate when absent.
    pub c1: Option<f64>,
    /// `N_1, …, N_l`; `max(1, c0)` each when absent.
    pub norm_bounds: Option<Vec<f64>>,
    /// `δ_1, …, δ_l`.
    pub norm_deltas: Option<Vec<f64>>,
    pub quantile: f64,
    pub trials: usize,
    pub cnn: CnnBoundParams,
}

impl Default for BoundsParams {
    fn default() -> Self {
        BoundsParams {
            depth: 4,
            width: 256,
            alpha: 0.5,
            eps: 0.1,
            delta: 0.1,
            lipschitz: None,
            k: 1.0,
            c0: None,
            delta0: None,
            c1: None,
            norm_bounds: None,
            norm_deltas: None,
            quantile: 0.95,
            trials: 200,
            cnn: CnnBoundParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnBoundParams {
    pub depth: usize,
    pub width: usize,
    pub spatial: f64,
    pub kernel: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub p0: f64,
    pub lipschitz: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for CnnBoundParams {
    fn default() -> Self {
        CnnBoundParams {
            depth: 3,
            width: 256,
            spatial: 32.0,
            kernel: 3.0,
            alpha: 0.6,
            beta1: 0.1,
            beta2: 0.05,
            p0: 1.0,
            lipschitz: 1.0,
            c3: 0.6,
            c4: 0.6,
            c5: 0.6,
        }
    }
}

/// Reduced versions of the cross-checks, for a quick health run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSuiteParams {
    /// Monte Carlo trials of the order-statistic and balls-into-bins checks.
    pub trials: usize,
    pub circulant_instances: usize,
    pub linalg_instances: usize,
    pub sigmas: f64,
}

impl Default for OracleSuiteParams {
    fn default() -> Self {
        OracleSuiteParams {
            trials: 20_000,
            circulant_instances: 20,
            linalg_instances: 20,
            sigmas: 3.0,
        }
    }
}
