//! Calibrating stochastic differential equations to ergodic statistics.
//!
//! The pipeline: integrate a parameterized model ([`sde`]), reduce the
//! trajectory to finite-time averages ([`observables`]), and fit the
//! parameters with ensemble Kalman inversion ([`eki`]). Unknown functions
//! inside drifts and potentials are represented through [`funcparam`];
//! the benchmark systems live in [`models`] and the experiment driver in
//! [`runner`].

pub mod eki;
pub mod funcparam;
pub mod models;
pub mod observables;
pub mod rng;
pub mod runner;
pub mod sde;
