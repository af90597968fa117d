//! Two-stage sparse estimation for linear regression.
//!
//! Stage one fits a Bayesian posterior over regression coefficients, either a
//! spike-and-slab g-prior ([`spikeslab`]) or the horseshoe shrinkage prior
//! ([`horseshoe`]). Stage two extracts a sparse point estimate by minimizing
//! posterior-expected penalized prediction loss: the posterior draws are
//! condensed into per-coefficient penalty weights ([`weights`]) and a weighted
//! lasso solution path is traced over the smoothed target `X * post_mean`
//! ([`wlasso`]). A single estimate is picked from the path by benchmarking
//! each entry's predictive error against the posterior mean ([`select`]), or
//! by a local false discovery rate rule.
//!
//! The crate also carries the supporting pieces used to evaluate the method:
//! synthetic data generation with equicorrelated designs ([`data`]),
//! cross-validated lasso and iteratively reweighted l1 baselines
//! ([`baselines`]), and selection/prediction metrics ([`metrics`]).
//!
//! Everything here is pure computation over in-memory values; file formats,
//! CSV/JSON serialization, and the command-line driver live in the companion
//! `decouple-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod error;
pub mod horseshoe;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod rng;
pub mod select;
pub mod spikeslab;
pub mod weights;
pub mod wlasso;

pub use data::{Dataset, SimConfig};
pub use error::{Error, Result};
pub use horseshoe::HsDraws;
pub use select::{ApmPath, BenchmarkReport, SelectionRule};
pub use spikeslab::SsDraws;
pub use weights::{PenaltyKind, WeightVector};
pub use wlasso::{SolutionPath, TargetKind};
