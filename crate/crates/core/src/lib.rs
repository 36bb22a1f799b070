//! Pruning of random fully connected and convolutional networks, with Monte
//! Carlo checks of the quantities that control the pruned-versus-target gap.
//!
//! The modules build on each other in order: [`linalg`] and [`sampling`]
//! underlie [`networks`] and [`circulant`]; [`pruning`] builds masks;
//! [`theory`] holds closed forms and bound calculators; [`estimators`]
//! estimates the norm constants; [`harness`] runs whole experiments.

// `!(x > 0.0)` is the NaN-rejecting form used in parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circulant;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod networks;
pub mod pruning;
pub mod sampling;
pub mod theory;

pub use circulant::{ConvTensor, PaddedKernel};
pub use error::{Error, Result};
pub use estimators::{LatalaDist, LatalaRow, Lemma3Row, QuantileEstimate};
pub use harness::{ExperimentConfig, ExperimentKind, OutputFormat, Report};
pub use linalg::{Matrix, Vector};
pub use networks::{Activation, CnnModel, Domain, FcnModel, GapEstimate, LayerMask, MaskSet, Network};
pub use pruning::{PruneAmount, PruneScheme, PruneSpec};
pub use sampling::{DistributionSpec, SeedSpec};
pub use theory::{BoundReport, Direction, MonteCarloEstimate, ProbabilityReport, TheoremConstants, WidthBound};
