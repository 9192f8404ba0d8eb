//! Consensus-based optimization (CBO) for objectives with several global
//! minimizers.
//!
//! The crate is organised around the pieces of the method:
//!
//! - [`objectives`]: objective catalog, minimizer-set geometry and
//!   sample-based checks of the growth/regularity hypotheses.
//! - [`consensus`]: weight kernels and the stabilized per-particle consensus
//!   point.
//! - [`dynamics`]: the Euler–Maruyama particle stepper and run orchestration.
//! - [`diagnostics`]: the concentration functional, Laplace-principle checks,
//!   regressions and 1D Wasserstein distances.
//! - [`meanfield`]: a 1D finite-volume solver for the mean-field
//!   Fokker–Planck equation.
//! - [`cli`]: the batch experiment driver behind the `polycbo` binary.

// `!(x <= y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod consensus;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod meanfield;
pub mod objectives;
pub mod rng;

pub use error::{Error, Result};

/// A point in R^d.
pub type Point = Vec<f64>;

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Closest candidate to a misspelled name, if any is reasonably close.
pub(crate) fn did_you_mean<'a>(bad: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(bad, c), c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}
