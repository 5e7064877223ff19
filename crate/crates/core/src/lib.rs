//! Popularity-bias measurement for top-k recommenders.
//!
//! Numeric code in [`metrics`] and [`distfit`] is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the common `f64` instantiations.

// `!(a > b)` is used on purpose so that NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod distfit;
pub mod eval;
pub mod metrics;
pub mod recommenders;
mod scalar;
pub mod synthetic;

pub use scalar::Scalar;

pub type ParetoFitF64 = distfit::ParetoFit<f64>;
pub type ParetoFitF32 = distfit::ParetoFit<f32>;
pub type FixtureF64 = metrics::PerturbationFixture<f64>;
