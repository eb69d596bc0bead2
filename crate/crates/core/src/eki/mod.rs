//! Ensemble Kalman inversion for noisy forward maps.
//!
//! Particles live in the unconstrained coordinates of a
//! [`ParameterLayout`](crate::funcparam::ParameterLayout). Each generation
//! evaluates the forward map for every member (concurrently, one random
//! stream per member), then moves all members with the Kalman-type update
//! built from the ensemble's empirical covariances.

mod ensemble;
mod history;
mod run;
mod step;

pub use ensemble::{sample_initial_ensemble, Ensemble, Prior};
pub use history::{EkiHistory, GenerationRecord};
pub use run::{misfit, misfit_of, run_eki, EkiSettings, StoppingRule};
pub use step::{eki_step, ensemble_covariances};

use thiserror::Error;

use crate::funcparam::ParameterLayout;
use crate::observables::DataVector;
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EkiError {
    #[error("C^GG + Γ is numerically singular")]
    SingularSystem,
    #[error("every forward evaluation failed in generation {generation}: {first_error}")]
    AllMembersFailed { generation: usize, first_error: String },
    #[error("forward evaluation failed: {0}")]
    ForwardFailed(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A failed forward evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ForwardError(pub String);

impl ForwardError {
    pub fn new(msg: impl std::fmt::Display) -> Self {
        Self(msg.to_string())
    }
}

/// A possibly noisy, possibly failing map from parameters to statistics.
pub trait ForwardModel: Sync {
    /// Length of the returned statistic vector.
    fn data_dim(&self) -> usize;

    /// Statistics at unconstrained parameter vector `theta`. All randomness
    /// must come from `stream`.
    fn evaluate(&self, theta: &[f64], stream: RngStream) -> Result<Vec<f64>, ForwardError>;
}

/// Adapts a closure into a [`ForwardModel`].
pub struct FnForward<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> ForwardModel for FnForward<F>
where
    F: Fn(&[f64], RngStream) -> Result<Vec<f64>, ForwardError> + Sync,
{
    fn data_dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &[f64], stream: RngStream) -> Result<Vec<f64>, ForwardError> {
        (self.f)(theta, stream)
    }
}

/// Data, forward map and parameter layout of one calibration.
pub struct InverseProblem<F> {
    pub forward: F,
    pub data: DataVector,
    pub layout: ParameterLayout,
}

impl<F: ForwardModel> InverseProblem<F> {
    pub fn new(forward: F, data: DataVector, layout: ParameterLayout) -> Result<Self, EkiError> {
        if forward.data_dim() != data.len() {
            return Err(EkiError::DimensionMismatch(format!(
                "forward map returns {} statistics, data has {}",
                forward.data_dim(),
                data.len()
            )));
        }
        Ok(Self { forward, data, layout })
    }
}
