//! Parameterized unknown functions and the flat parameter vector layout.
//!
//! Two families are provided: Gaussian-process mean functions whose node
//! values and hyperparameters are learned ([`GpMeanFunction`]), and fixed
//! Gaussian-bump expansions with learned weights ([`GaussianBasisFunction`]).
//! [`ParameterLayout`] maps named parameter groups to and from the
//! unconstrained vector the ensemble method works on.

mod basis;
mod gp;
mod layout;

pub use basis::{periodic_centers, GaussianBasisFunction};
pub use gp::{equispaced_nodes, evaluate_mean, fit_representer, rbf_kernel, FittedGp, GpMeanFunction};
pub use layout::{ParamSlice, ParameterLayout, ParameterValues, Transform};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuncParamError {
    #[error("Gram matrix is singular even after jitter")]
    SingularGram,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),
}

/// `ln(1 + e^x)`, evaluated without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// A scalar function of one real argument.
pub trait ScalarFunction: Send + Sync {
    fn value(&self, x: f64) -> f64;
}

impl ScalarFunction for FittedGp {
    fn value(&self, x: f64) -> f64 {
        self.eval(&[x])
    }
}

impl ScalarFunction for GaussianBasisFunction {
    fn value(&self, x: f64) -> f64 {
        GaussianBasisFunction::value(self, x)
    }
}

/// `f(x) = slope · x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub offset: f64,
}

impl ScalarFunction for Affine {
    fn value(&self, x: f64) -> f64 {
        self.slope * x + self.offset
    }
}
