//! Cadlag path analysis under the weak-M1 (WM1) Skorokhod topology.
//!
//! The crate is organised by concern:
//!
//! * [`cadlag`]: exact piecewise-affine cadlag paths and their elementary calculus.
//! * [`graphrep`]: thick graphs, the weak order and weak parametric representations,
//!   including the total-variation time-stretching construction.
//! * [`metrics`]: one-dimensional M1 distance by curve matching, the product metric,
//!   certified brackets for the weak metric and a J1 baseline.
//! * [`oscillation`]: oscillation functionals and compactness/tightness diagnostics.
//! * [`timestretch`]: clocks, left inverses and the stretched-path pipeline.
//! * [`control`]: cone geometry, orthant reduction, Euler simulation of singularly
//!   controlled diffusions and Monte Carlo cost estimation.
//! * [`fixtures`]: the two-jump example family used throughout tests and the CLI demo.

// `!(a > b)` is used on purpose so that NaN inputs fail validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cadlag;
pub mod control;
pub mod error;
pub mod fixtures;
pub mod graphrep;
pub mod metrics;
pub mod oscillation;
pub mod timestretch;

pub use cadlag::{Breakpoint, CadlagPath, Jump, PadMode, PathSpec, SegmentSpec, VariationNorm};
pub use error::{Error, Result};
pub use graphrep::{ParamRep, ParamRepReport, ProductSegment};
pub use metrics::{DistanceBracket, Witness};

/// Absolute tolerance for comparing breakpoint times.
pub const TIME_TOL: f64 = 1e-12;

/// Absolute tolerance for thick-graph membership tests.
pub const GRAPH_TOL: f64 = 1e-9;

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
