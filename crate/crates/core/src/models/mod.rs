//! Benchmark systems and the registry that binds them to parameter layouts.
//!
//! [`ModelConfig`] names a model family, holds its fixed constants, declares
//! which quantities are learned (its [`ParameterLayout`]), and builds a
//! ready-to-integrate model from raw parameter values.

mod butane;
mod enso;
mod lorenz63;
mod lorenz96;

pub use butane::DihedralLangevin;
pub use enso::DelayedOscillator;
pub use lorenz63::{Lorenz63, Lorenz63Pca, Lorenz63Reduced};
pub use lorenz96::{Lorenz96Closure, Lorenz96Multiscale};

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcparam::{
    equispaced_nodes, periodic_centers, softplus, Affine, FuncParamError, GaussianBasisFunction, ParameterLayout,
    ParameterValues, ScalarFunction, Transform,
};
use crate::rng::RngStream;
use crate::sde::{
    integrate_em, integrate_langevin2, integrate_sdde, Langevin2Model, SddeModel, SdeError, SdeModel, StepConfig,
    Trajectory,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Parameters(#[from] FuncParamError),
    #[error("model configuration: {0}")]
    Config(String),
}

/// Integration settings for one simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub duration: f64,
    /// Spacing of stored states; must be a multiple of `dt`. Defaults to `dt`.
    #[serde(default)]
    pub output_interval: Option<f64>,
    /// Initial state (or, for delay models, the constant history value).
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

impl SimSettings {
    pub fn steps(&self) -> Result<StepConfig, ModelError> {
        if !(self.dt > 0.0 && self.duration > 0.0) {
            return Err(ModelError::Config(format!(
                "dt ({}) and duration ({}) must be positive",
                self.dt, self.duration
            )));
        }
        let stride = match self.output_interval {
            None => 1,
            Some(h) => {
                let r = h / self.dt;
                if !(r >= 1.0 - 1e-9) || (r - r.round()).abs() > 1e-6 * r {
                    return Err(ModelError::Config(format!(
                        "output interval {h} is not a multiple of dt {}",
                        self.dt
                    )));
                }
                r.round() as usize
            }
        };
        Ok(StepConfig::covering(self.dt, self.duration, stride))
    }
}

/// An instantiated model, ready for the matching integrator.
#[derive(Clone)]
pub enum BuiltModel {
    Sde(Arc<dyn SdeModel>),
    Sdde(Arc<dyn SddeModel>),
    Langevin(Arc<dyn Langevin2Model>),
}

/// A fitted or fixed scalar function exported for inspection.
#[derive(Clone)]
pub struct NamedFunction {
    pub name: String,
    pub function: Arc<dyn ScalarFunction>,
    pub domain: (f64, f64),
}

struct Softplus(Arc<dyn ScalarFunction>);

impl ScalarFunction for Softplus {
    fn value(&self, x: f64) -> f64 {
        softplus(self.0.value(x))
    }
}

fn fitted_gp(params: &ParameterValues, prefix: &str, nodes: &[f64]) -> Result<Arc<dyn ScalarFunction>, ModelError> {
    Ok(Arc::new(params.gp(prefix, nodes)?.fit()?))
}

fn require_range(range: Option<[f64; 2]>, what: &str) -> Result<(f64, f64), ModelError> {
    match range {
        Some([lo, hi]) if hi > lo => Ok((lo, hi)),
        Some([lo, hi]) => Err(ModelError::Config(format!("{what} node range [{lo}, {hi}] is empty"))),
        None => Err(ModelError::Config(format!("{what} node range is unresolved"))),
    }
}

/// Range of the given components of `traj`, widened by 10% on each side.
pub fn padded_range(traj: &Trajectory, components: &[usize]) -> [f64; 2] {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in traj.rows() {
        for &c in components {
            lo = lo.min(row[c]);
            hi = hi.max(row[c]);
        }
    }
    let pad = 0.1 * (hi - lo).max(1e-12);
    [lo - pad, hi + pad]
}

/// Which Lorenz 63 constants a [`Lorenz63Config`] learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lorenz63Param {
    Alpha,
    Rho,
    Beta,
    Sigma,
}

fn d_alpha() -> f64 {
    10.0
}
fn d_rho() -> f64 {
    28.0
}
fn d_beta() -> f64 {
    8.0 / 3.0
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz63Config {
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_rho")]
    pub rho: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Constants replaced by learned values.
    #[serde(default)]
    pub learn: Vec<Lorenz63Param>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz63GpConfig {
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_rho")]
    pub rho: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Noise level used when `learn_sigma` is off.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "d_true")]
    pub learn_sigma: bool,
    #[serde(default = "d_nodes5")]
    pub nodes: usize,
    /// Node interval on `x₂`; defaults to the padded data range.
    #[serde(default)]
    pub node_range: Option<[f64; 2]>,
}

fn d_nodes5() -> usize {
    5
}
fn d_nodes7() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz63PcaConfig {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz63ReducedConfig {
    #[serde(default = "d_nodes5")]
    pub nodes: usize,
    #[serde(default)]
    pub a1_range: Option<[f64; 2]>,
    #[serde(default)]
    pub a2_range: Option<[f64; 2]>,
}

fn d_k() -> usize {
    36
}
fn d_j() -> usize {
    10
}
fn d_one() -> f64 {
    1.0
}
fn d_ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz96MultiscaleConfig {
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_j")]
    pub j: usize,
    #[serde(default = "d_one")]
    pub h: f64,
    #[serde(default = "d_ten")]
    pub forcing: f64,
    #[serde(default = "d_ten")]
    pub c: f64,
    #[serde(default = "d_ten")]
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz96ClosureConfig {
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_j")]
    pub j: usize,
    #[serde(default = "d_one")]
    pub h: f64,
    #[serde(default = "d_ten")]
    pub forcing: f64,
    #[serde(default = "d_ten")]
    pub c: f64,
    #[serde(default = "d_nodes7")]
    pub nodes: usize,
    #[serde(default)]
    pub node_range: Option<[f64; 2]>,
    #[serde(default = "d_true")]
    pub learn_sigma: bool,
    #[serde(default)]
    pub sigma: f64,
}

fn d_tau1() -> f64 {
    1.0
}
fn d_tau2() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedOscillatorConfig {
    #[serde(default = "d_tau1")]
    pub tau1: f64,
    #[serde(default = "d_tau2")]
    pub tau2: f64,
}

fn d_centers() -> usize {
    9
}
fn d_width() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DihedralLangevinConfig {
    #[serde(default = "d_centers")]
    pub centers: usize,
    #[serde(default = "d_width")]
    pub width: f64,
}

/// Registry of model families, selected by the `name` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ModelConfig {
    #[serde(rename = "lorenz63")]
    Lorenz63(Lorenz63Config),
    #[serde(rename = "lorenz63_gp")]
    Lorenz63Gp(Lorenz63GpConfig),
    #[serde(rename = "lorenz63_pca")]
    Lorenz63Pca(Lorenz63PcaConfig),
    #[serde(rename = "lorenz63_pca_reduced")]
    Lorenz63Reduced(Lorenz63ReducedConfig),
    #[serde(rename = "lorenz96_multiscale")]
    Lorenz96Multiscale(Lorenz96MultiscaleConfig),
    #[serde(rename = "lorenz96_closure")]
    Lorenz96Closure(Lorenz96ClosureConfig),
    #[serde(rename = "delayed_oscillator")]
    DelayedOscillator(DelayedOscillatorConfig),
    #[serde(rename = "dihedral_langevin")]
    DihedralLangevin(DihedralLangevinConfig),
}

/// Registered model names.
pub const MODEL_NAMES: [&str; 8] = [
    "lorenz63",
    "lorenz63_gp",
    "lorenz63_pca",
    "lorenz63_pca_reduced",
    "lorenz96_multiscale",
    "lorenz96_closure",
    "delayed_oscillator",
    "dihedral_langevin",
];

/// Salt separating initial-condition draws from the integrator's increments.
const INITIAL_STATE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn initial_rng(stream: RngStream) -> rand_chacha::ChaCha8Rng {
    RngStream::new(stream.master_seed ^ INITIAL_STATE_SALT, stream.stream_id).generator()
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Lorenz63(_) => MODEL_NAMES[0],
            ModelConfig::Lorenz63Gp(_) => MODEL_NAMES[1],
            ModelConfig::Lorenz63Pca(_) => MODEL_NAMES[2],
            ModelConfig::Lorenz63Reduced(_) => MODEL_NAMES[3],
            ModelConfig::Lorenz96Multiscale(_) => MODEL_NAMES[4],
            ModelConfig::Lorenz96Closure(_) => MODEL_NAMES[5],
            ModelConfig::DelayedOscillator(_) => MODEL_NAMES[6],
            ModelConfig::DihedralLangevin(_) => MODEL_NAMES[7],
        }
    }

    /// Learned quantities, in flat-vector order.
    pub fn layout(&self) -> ParameterLayout {
        match self {
            ModelConfig::Lorenz63(c) => {
                let mut l = ParameterLayout::new();
                for (p, name, t) in [
                    (Lorenz63Param::Alpha, "alpha", Transform::Identity),
                    (Lorenz63Param::Rho, "rho", Transform::Identity),
                    (Lorenz63Param::Beta, "beta", Transform::Identity),
                    (Lorenz63Param::Sigma, "sigma", Transform::Log),
                ] {
                    if c.learn.contains(&p) {
                        l = l.scalar(name, t);
                    }
                }
                l
            }
            ModelConfig::Lorenz63Gp(c) => {
                let l = ParameterLayout::new().gp("g_l", c.nodes);
                if c.learn_sigma {
                    l.scalar("sigma", Transform::Log)
                } else {
                    l
                }
            }
            ModelConfig::Lorenz63Pca(_) | ModelConfig::Lorenz96Multiscale(_) => ParameterLayout::new(),
            ModelConfig::Lorenz63Reduced(c) => ["psi1", "psi2", "s1", "s2"]
                .iter()
                .fold(ParameterLayout::new(), |l, p| l.gp(p, c.nodes)),
            ModelConfig::Lorenz96Closure(c) => {
                let l = ParameterLayout::new().gp("psi", c.nodes);
                if c.learn_sigma {
                    l.scalar("sigma", Transform::Log)
                } else {
                    l
                }
            }
            ModelConfig::DelayedOscillator(_) => ParameterLayout::new()
                .scalar("a", Transform::Identity)
                .scalar("b", Transform::Identity)
                .scalar("c", Transform::Log)
                .scalar("sigma", Transform::Log),
            ModelConfig::DihedralLangevin(c) => ParameterLayout::new()
                .scalar("gamma", Transform::Log)
                .scalar("sigma", Transform::Log)
                .vector("weights", c.centers, Transform::Identity),
        }
    }

    /// Number of components in a simulated trajectory.
    pub fn state_dim(&self) -> usize {
        match self {
            ModelConfig::Lorenz63(_) | ModelConfig::Lorenz63Gp(_) | ModelConfig::Lorenz63Pca(_) => 3,
            ModelConfig::Lorenz63Reduced(_) => 2,
            ModelConfig::Lorenz96Multiscale(c) => c.k * (1 + c.j),
            ModelConfig::Lorenz96Closure(c) => c.k,
            ModelConfig::DelayedOscillator(_) | ModelConfig::DihedralLangevin(_) => 1,
        }
    }

    /// Components that are observed when this model generates data.
    pub fn default_observed(&self) -> Option<Vec<usize>> {
        match self {
            ModelConfig::Lorenz63Pca(_) => Some(vec![0, 1]),
            ModelConfig::Lorenz96Multiscale(c) => Some((0..c.k).collect()),
            _ => None,
        }
    }

    /// Fill unset GP node intervals from the padded range of observed data.
    pub fn resolve_node_ranges(&mut self, data: &Trajectory) {
        match self {
            ModelConfig::Lorenz63Gp(c) if c.node_range.is_none() && data.dim() > 1 => {
                c.node_range = Some(padded_range(data, &[1]));
            }
            ModelConfig::Lorenz63Reduced(c) if data.dim() > 1 => {
                c.a1_range.get_or_insert_with(|| padded_range(data, &[0]));
                c.a2_range.get_or_insert_with(|| padded_range(data, &[1]));
            }
            ModelConfig::Lorenz96Closure(c) if c.node_range.is_none() => {
                let all: Vec<usize> = (0..data.dim()).collect();
                c.node_range = Some(padded_range(data, &all));
            }
            _ => {}
        }
    }

    /// Instantiate with raw parameter values laid out per [`layout`](Self::layout).
    pub fn build(&self, params: &ParameterValues) -> Result<BuiltModel, ModelError> {
        Ok(match self {
            ModelConfig::Lorenz63(c) => {
                let pick = |p: Lorenz63Param, name: &str, fixed: f64| {
                    if c.learn.contains(&p) {
                        params.scalar(name)
                    } else {
                        Ok(fixed)
                    }
                };
                BuiltModel::Sde(Arc::new(Lorenz63::new(
                    pick(Lorenz63Param::Alpha, "alpha", c.alpha)?,
                    pick(Lorenz63Param::Rho, "rho", c.rho)?,
                    pick(Lorenz63Param::Beta, "beta", c.beta)?,
                    pick(Lorenz63Param::Sigma, "sigma", c.sigma)?,
                )))
            }
            ModelConfig::Lorenz63Gp(c) => {
                let (lo, hi) = require_range(c.node_range, "g_l")?;
                let g = fitted_gp(params, "g_l", &equispaced_nodes(lo, hi, c.nodes))?;
                let sigma = if c.learn_sigma { params.scalar("sigma")? } else { c.sigma };
                BuiltModel::Sde(Arc::new(Lorenz63::new(c.alpha, c.rho, c.beta, sigma).with_damping(g)))
            }
            ModelConfig::Lorenz63Pca(_) => BuiltModel::Sde(Arc::new(Lorenz63Pca)),
            ModelConfig::Lorenz63Reduced(c) => {
                let (l1, h1) = require_range(c.a1_range, "a1")?;
                let (l2, h2) = require_range(c.a2_range, "a2")?;
                let on_a1 = equispaced_nodes(l1, h1, c.nodes);
                let on_a2 = equispaced_nodes(l2, h2, c.nodes);
                BuiltModel::Sde(Arc::new(Lorenz63Reduced {
                    psi1: fitted_gp(params, "psi1", &on_a2)?,
                    psi2: fitted_gp(params, "psi2", &on_a1)?,
                    s1: fitted_gp(params, "s1", &on_a2)?,
                    s2: fitted_gp(params, "s2", &on_a1)?,
                    noiseless: false,
                }))
            }
            ModelConfig::Lorenz96Multiscale(c) => BuiltModel::Sde(Arc::new(Lorenz96Multiscale {
                k: c.k,
                j: c.j,
                h: c.h,
                forcing: c.forcing,
                c: c.c,
                b: c.b,
            })),
            ModelConfig::Lorenz96Closure(c) => {
                let (lo, hi) = require_range(c.node_range, "psi")?;
                BuiltModel::Sde(Arc::new(Lorenz96Closure {
                    k: c.k,
                    j: c.j,
                    h: c.h,
                    forcing: c.forcing,
                    c: c.c,
                    closure: Some(fitted_gp(params, "psi", &equispaced_nodes(lo, hi, c.nodes))?),
                    sigma: if c.learn_sigma { params.scalar("sigma")? } else { c.sigma },
                }))
            }
            ModelConfig::DelayedOscillator(c) => BuiltModel::Sdde(Arc::new(DelayedOscillator::new(
                params.scalar("a")?,
                params.scalar("b")?,
                params.scalar("c")?,
                params.scalar("sigma")?,
                c.tau1,
                c.tau2,
            ))),
            ModelConfig::DihedralLangevin(c) => BuiltModel::Langevin(Arc::new(DihedralLangevin {
                gamma: params.scalar("gamma")?,
                sigma: params.scalar("sigma")?,
                potential: self.potential(c, params)?,
            })),
        })
    }

    fn potential(&self, c: &DihedralLangevinConfig, params: &ParameterValues) -> Result<GaussianBasisFunction, ModelError> {
        let weights = params.require("weights")?.to_vec();
        if weights.len() != c.centers || !(c.width > 0.0) {
            return Err(ModelError::Config(format!(
                "{} weights for {} centers of width {}",
                weights.len(),
                c.centers,
                c.width
            )));
        }
        Ok(GaussianBasisFunction::new(periodic_centers(c.centers), c.width, weights, true))
    }

    /// Default starting state; random draws come from a stream tied to `stream`.
    fn initial_state(&self, stream: RngStream) -> Vec<f64> {
        match self {
            ModelConfig::Lorenz63(_) | ModelConfig::Lorenz63Gp(_) => vec![1.0, 1.0, 1.0],
            ModelConfig::Lorenz63Pca(_) => vec![1.0, -20.0, 1.0],
            ModelConfig::Lorenz63Reduced(_) => vec![1.0, -20.0],
            ModelConfig::Lorenz96Multiscale(c) => {
                let mut rng = initial_rng(stream);
                let x: Vec<f64> = (0..c.k)
                    .map(|_| c.forcing / 2.0 + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let balance = c.h / c.j as f64;
                let y: Vec<f64> = (0..c.k * c.j)
                    .map(|m| balance * x[m / c.j] + 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                x.into_iter().chain(y).collect()
            }
            ModelConfig::Lorenz96Closure(c) => {
                let mut rng = initial_rng(stream);
                let x_star = c.forcing / (1.0 + c.h * c.h * c.c / c.j as f64);
                (0..c.k).map(|_| x_star + rng.sample::<f64, _>(StandardNormal)).collect()
            }
            ModelConfig::DelayedOscillator(_) | ModelConfig::DihedralLangevin(_) => vec![0.0],
        }
    }

    /// Simulate with raw parameter values. Langevin models return the angle only.
    pub fn simulate(&self, params: &ParameterValues, sim: &SimSettings, stream: RngStream) -> Result<Trajectory, ModelError> {
        let steps = sim.steps()?;
        let x0 = match &sim.initial {
            Some(v) => v.clone(),
            None => self.initial_state(stream),
        };
        let model = self.build(params)?;
        let expected = match &model {
            BuiltModel::Sde(m) => m.dim(),
            BuiltModel::Sdde(m) => m.dim(),
            BuiltModel::Langevin(_) => x0.len().clamp(1, 2),
        };
        if x0.len() != expected {
            return Err(ModelError::Config(format!(
                "initial state has {} entries, {} expects {expected}",
                x0.len(),
                self.name()
            )));
        }
        Ok(match model {
            BuiltModel::Sde(m) => integrate_em(m.as_ref(), &x0, steps, stream)?,
            BuiltModel::Sdde(m) => {
                let max_delay = m.delays().iter().cloned().fold(0.0, f64::max);
                let rows = (max_delay / sim.dt - 1e-9).ceil() as usize + 1;
                let history = Trajectory::new(sim.dt, -((rows - 1) as f64) * sim.dt, m.dim(), x0.repeat(rows))?;
                integrate_sdde(m.as_ref(), &history, steps, stream)?
            }
            BuiltModel::Langevin(m) => {
                let v0 = x0.get(1).copied().unwrap_or(0.0);
                integrate_langevin2(m.as_ref(), x0[0], v0, steps, stream)?.project(&[0])
            }
        })
    }

    /// Unknown (or fixed, for truth models) scalar functions with their domains.
    pub fn functions(&self, params: &ParameterValues) -> Result<Vec<NamedFunction>, ModelError> {
        let named = |name: &str, f: Arc<dyn ScalarFunction>, domain: (f64, f64)| NamedFunction {
            name: name.to_string(),
            function: f,
            domain,
        };
        Ok(match self {
            ModelConfig::Lorenz63(_) => vec![named("g_l", Arc::new(Affine { slope: 1.0, offset: 0.0 }), (-30.0, 30.0))],
            ModelConfig::Lorenz63Gp(c) => {
                let (lo, hi) = require_range(c.node_range, "g_l")?;
                vec![named("g_l", fitted_gp(params, "g_l", &equispaced_nodes(lo, hi, c.nodes))?, (lo, hi))]
            }
            ModelConfig::Lorenz63Reduced(c) => {
                let r1 = require_range(c.a1_range, "a1")?;
                let r2 = require_range(c.a2_range, "a2")?;
                let on_a1 = equispaced_nodes(r1.0, r1.1, c.nodes);
                let on_a2 = equispaced_nodes(r2.0, r2.1, c.nodes);
                vec![
                    named("psi1", fitted_gp(params, "psi1", &on_a2)?, r2),
                    named("psi2", fitted_gp(params, "psi2", &on_a1)?, r1),
                    named("sigma1", Arc::new(Softplus(fitted_gp(params, "s1", &on_a2)?)), r2),
                    named("sigma2", Arc::new(Softplus(fitted_gp(params, "s2", &on_a1)?)), r1),
                ]
            }
            ModelConfig::Lorenz96Closure(c) => {
                let (lo, hi) = require_range(c.node_range, "psi")?;
                vec![named("psi", fitted_gp(params, "psi", &equispaced_nodes(lo, hi, c.nodes))?, (lo, hi))]
            }
            ModelConfig::DihedralLangevin(c) => {
                let pi = std::f64::consts::PI;
                vec![named("potential", Arc::new(self.potential(c, params)?), (-pi, pi))]
            }
            _ => Vec::new(),
        })
    }
}
