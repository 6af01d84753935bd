//! Simulation and inference for the time-inhomogeneous SI diffusion
//!
//! `X(t) = K·x0 / (x0 + (K − x0)·e^{−Z(t)})`, `Z(t) = Λ(t|t0) + W[V(t|t0)]`,
//! where `Λ` and `V` integrate the transmission intensity `λ(t)` and the noise
//! intensity `σ²(t)`. The crate provides the closed-form law, exact path
//! simulation, moment-based estimation of `λ(t)` and `σ²(t)` with spline
//! differentiation, a constant-rate MLE baseline, a replicated Monte Carlo
//! harness and CSV/JSON I/O for the `sidiff` command-line tool.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the harness and CLI use.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataio;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod model;
pub mod quadrature;
pub mod rates;
pub mod scalar;
pub mod simulate;
pub mod spline;
pub mod stats;

pub use error::{Error, ErrorCategory, Result};
pub use scalar::Scalar;

pub type RateFunction = rates::RateFunction<f64>;
pub type RatePair = rates::RatePair<f64>;
pub type TransitionLaw = model::TransitionLaw<f64>;
pub type TimeGrid = simulate::TimeGrid<f64>;
pub type PathSet = simulate::PathSet<f64>;
pub type SplineCurve = spline::SplineCurve<f64>;
pub type EstimateResult = estimate::EstimateResult<f64>;

pub type RateFunction32 = rates::RateFunction<f32>;
pub type RatePair32 = rates::RatePair<f32>;
pub type TransitionLaw32 = model::TransitionLaw<f32>;
pub type TimeGrid32 = simulate::TimeGrid<f32>;
pub type PathSet32 = simulate::PathSet<f32>;
pub type SplineCurve32 = spline::SplineCurve<f32>;
