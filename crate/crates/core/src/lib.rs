//! Fast surrogates for an expensive snap-fit assembly simulation.
//!
//! The crate covers the whole identification chain:
//!
//! - [`doe`]: the 17-run experiment table and generic two-level designs;
//! - [`oracle`]: a deterministic stand-in simulator producing force profiles;
//! - [`pspline`]: penalized B-spline fits, piecewise-cubic export and a
//!   coefficient-response model across factor settings;
//! - [`seqnet`]: a from-scratch stacked LSTM identifier trained with Adam;
//! - [`eval`]: MAE/MSE comparison of both surrogates.

// `!(x > y)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod doe;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod oracle;
pub mod pspline;
pub mod seqnet;

pub use doe::{CodedRun, FactorSpec, RunConfig};
pub use error::{Error, Result};
pub use eval::{MetricsReport, MetricsRow, Scope};
pub use oracle::{ForceProfile, OracleParams};
pub use pspline::{CoeffResponseModel, KnotVector, PiecewiseCubic, SplineModel};
pub use seqnet::{SeqNetModel, TrainConfig, TrainReport};
