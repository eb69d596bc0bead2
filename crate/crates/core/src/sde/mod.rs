//! Stochastic integrators: ordinary SDEs, SDEs with discrete delays, and
//! second-order (underdamped) Langevin equations. All schemes are
//! Euler–Maruyama type and driven by an [`RngStream`](crate::rng::RngStream).

mod em;
mod langevin;
mod sdde;
mod trajectory;

pub use em::integrate_em;
pub use langevin::{integrate_langevin2, wrap_angle};
pub use sdde::integrate_sdde;
pub use trajectory::Trajectory;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("history spans {available} time units but the longest delay is {needed}")]
    InsufficientHistory { needed: f64, available: f64 },
    #[error("damping is not positive at angle {phi}")]
    NonPositiveDamping { phi: f64 },
    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// `dx = f(x) dt + sqrt(Σ(x)) dW` with the parameters already bound into the model.
pub trait SdeModel: Send + Sync {
    fn dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Writes `sqrt(Σ(x)) · xi` into `out`.
    fn diffuse(&self, x: &[f64], xi: &[f64], out: &mut [f64]);

    /// Models that never inject noise can skip drawing increments.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// Dense square root of the diffusion matrix at `x`.
    fn diffusion_sqrt(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.diffuse(x, &e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }
}

/// Scalar or vector SDE whose drift also reads the state at fixed lags `t - τ_i`.
pub trait SddeModel: Send + Sync {
    fn dim(&self) -> usize;

    fn delays(&self) -> &[f64];

    /// `delayed` holds one row of length `dim` per delay, in the order of [`delays`](Self::delays).
    fn drift(&self, x: &[f64], delayed: &[f64], out: &mut [f64]);

    fn diffuse(&self, x: &[f64], xi: &[f64], out: &mut [f64]);

    fn is_deterministic(&self) -> bool {
        false
    }
}

/// `φ'' + γ(φ) φ' + Ψ'(φ) = sqrt(2 σ γ(φ)) dW/dt`.
pub trait Langevin2Model: Send + Sync {
    fn damping(&self, phi: f64) -> f64;

    fn potential_grad(&self, phi: f64) -> f64;

    fn noise_scale(&self) -> f64;

    /// Emit the angle wrapped to `[-π, π)`.
    fn periodic(&self) -> bool {
        false
    }
}

/// Step size, number of steps, and output decimation shared by all integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Keep every `stride`-th state.
    pub stride: usize,
}

impl StepConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    /// Steps needed to cover `duration` at this `dt`, rounded up to a multiple of `stride`.
    pub fn covering(dt: f64, duration: f64, stride: usize) -> Self {
        let raw = (duration / dt - 1e-9).ceil().max(1.0) as usize;
        let stride = stride.max(1);
        let n_steps = raw.div_ceil(stride) * stride;
        Self {
            dt,
            n_steps,
            stride,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), SdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SdeError::InvalidSettings(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(SdeError::InvalidSettings("n_steps must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(SdeError::InvalidSettings("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn output_rows(&self) -> usize {
        self.n_steps / self.stride + 1
    }
}

/// Model assembled from closures; handy for tests and one-off experiments.
pub struct FnSde<F, G> {
    pub dim: usize,
    pub drift: F,
    pub diffusion: G,
    pub deterministic: bool,
}

impl<F, G> SdeModel for FnSde<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn diffuse(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, xi, out)
    }

    fn is_deterministic(&self) -> bool {
        self.deterministic
    }
}

/// One-dimensional Ornstein–Uhlenbeck process `dx = -rate x dt + amplitude dW`.
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub rate: f64,
    pub amplitude: f64,
}

impl SdeModel for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.rate * x[0];
    }

    fn diffuse(&self, _x: &[f64], xi: &[f64], out: &mut [f64]) {
        out[0] = self.amplitude * xi[0];
    }

    fn is_deterministic(&self) -> bool {
        self.amplitude == 0.0
    }
}
