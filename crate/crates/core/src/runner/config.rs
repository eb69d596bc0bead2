use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eki::{Prior, StoppingRule};
use crate::funcparam::{ParameterLayout, ParameterValues};
use crate::models::{ModelConfig, SimSettings};
use crate::observables::{all_moment_terms, marginal_moment_terms, AcfRequest, PsdRequest, StatisticsSpec};

use super::RunnerError;

/// A whole experiment: where data come from, which statistics form the
/// data vector, which model is fitted and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub statistics: StatisticsConfig,
    #[serde(default)]
    pub gamma: GammaConfig,
    pub model: ModelConfig,
    pub forward: SimSettings,
    pub eki: EkiConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub smoke: SmokeConfig,
}

/// Data-generating model with raw parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub model: ModelConfig,
    /// Raw values by slice name; scalars or arrays.
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    pub simulation: SimSettings,
    /// Components kept as observations; defaults per model.
    #[serde(default)]
    pub observe: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamValue {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            ParamValue::Scalar(v) => vec![*v],
            ParamValue::Vector(v) => v.clone(),
        }
    }
}

impl TruthConfig {
    /// Parameter values in the model's layout order.
    pub fn values(&self) -> Result<ParameterValues, RunnerError> {
        let layout = self.model.layout();
        let mut values = ParameterValues::default();
        for s in &layout.slices {
            let v = self
                .params
                .get(&s.name)
                .ok_or_else(|| RunnerError::Config(format!("truth.params is missing `{}`", s.name)))?
                .to_vec();
            if v.len() != s.len {
                return Err(RunnerError::Config(format!(
                    "truth.params.{} has {} values, expected {}",
                    s.name,
                    v.len(),
                    s.len
                )));
            }
            values.insert(&s.name, v);
        }
        if let Some(extra) = self.params.keys().find(|k| layout.slices.iter().all(|s| &s.name != *k)) {
            return Err(RunnerError::Config(format!("truth.params.{extra} is not a parameter of {}", self.model.name())));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    /// Simulate the truth model.
    Simulate { truth: TruthConfig },
    /// Read an observed scalar series. Without a data file the optional
    /// stand-in model generates a synthetic series of the same kind.
    File {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default = "default_column")]
        column: String,
        sampling_interval: f64,
        #[serde(default)]
        remove_mean: bool,
        #[serde(default)]
        stand_in: Option<TruthConfig>,
    },
}

fn default_column() -> String {
    "1".into()
}

/// Moment terms over a set of components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentGroup {
    /// Explicit components; alternatively `first` takes components `0..first`.
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    #[serde(default)]
    pub first: Option<usize>,
    pub max_order: usize,
    /// Only powers of single components instead of all products.
    #[serde(default)]
    pub marginal: bool,
}

impl MomentGroup {
    fn terms(&self) -> Result<Vec<Vec<usize>>, RunnerError> {
        let comps: Vec<usize> = match (&self.components, self.first) {
            (Some(c), None) => c.clone(),
            (None, Some(n)) => (0..n).collect(),
            _ => {
                return Err(RunnerError::Config(
                    "moment group needs exactly one of `components` or `first`".into(),
                ))
            }
        };
        Ok(if self.marginal {
            marginal_moment_terms(&comps, self.max_order)
        } else {
            all_moment_terms(&comps, self.max_order)
        })
    }
}

/// Evenly spaced ACF lags `spacing, 2·spacing, ..., count·spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcfGroup {
    pub components: Vec<usize>,
    pub spacing: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsConfig {
    #[serde(default)]
    pub moment_groups: Vec<MomentGroup>,
    /// Extra explicit moment terms, appended after the groups.
    #[serde(default)]
    pub moments: Vec<Vec<usize>>,
    #[serde(default)]
    pub acf_groups: Vec<AcfGroup>,
    #[serde(default)]
    pub acf: Vec<AcfRequest>,
    #[serde(default)]
    pub psd: Vec<PsdRequest>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub averaging_window: Option<f64>,
}

impl StatisticsConfig {
    pub fn to_spec(&self) -> Result<StatisticsSpec, RunnerError> {
        let mut moments = Vec::new();
        for g in &self.moment_groups {
            moments.extend(g.terms()?);
        }
        moments.extend(self.moments.iter().cloned());
        let mut acf = Vec::new();
        for g in &self.acf_groups {
            if !(g.spacing > 0.0) {
                return Err(RunnerError::Config(format!("acf spacing {} must be positive", g.spacing)));
            }
            for &c in &g.components {
                acf.push(AcfRequest {
                    component: c,
                    lags: (1..=g.count).map(|k| k as f64 * g.spacing).collect(),
                });
            }
        }
        acf.extend(self.acf.iter().cloned());
        Ok(StatisticsSpec {
            moments,
            acf,
            psd: self.psd.clone(),
            burn_in: self.burn_in,
            averaging_window: self.averaging_window,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GammaStructure {
    #[default]
    Full,
    /// Keep only the variances; useful when J is large relative to the batch count.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    #[serde(default = "default_batches")]
    pub n_batches: usize,
    #[serde(default)]
    pub structure: GammaStructure,
    /// Add the sampling noise of a forward-run average to that of the data average.
    #[serde(default = "default_true")]
    pub include_forward_noise: bool,
}

fn default_batches() -> usize {
    20
}
fn default_true() -> bool {
    true
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            n_batches: default_batches(),
            structure: GammaStructure::Full,
            include_forward_noise: true,
        }
    }
}

/// One prior for every coordinate of a slice, or one per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Shared(Prior),
    PerCoordinate(Vec<Prior>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EkiConfig {
    /// Defaults to `max(10, 2p)`.
    #[serde(default)]
    pub ensemble_size: Option<usize>,
    #[serde(default = "default_gens")]
    pub max_gens: usize,
    #[serde(default = "default_true")]
    pub perturb: bool,
    #[serde(default)]
    pub stop: StoppingRule,
    #[serde(default)]
    pub eval_budget: Option<usize>,
    /// Priors by slice name.
    pub priors: BTreeMap<String, PriorSpec>,
}

fn default_gens() -> usize {
    30
}

impl EkiConfig {
    /// Expand per-slice priors to one per flat coordinate.
    pub fn coordinate_priors(&self, layout: &ParameterLayout) -> Result<Vec<Prior>, RunnerError> {
        let mut out = Vec::with_capacity(layout.dim());
        for s in &layout.slices {
            match self.priors.get(&s.name) {
                None => return Err(RunnerError::Config(format!("eki.priors is missing `{}`", s.name))),
                Some(PriorSpec::Shared(p)) => out.extend(std::iter::repeat_n(*p, s.len)),
                Some(PriorSpec::PerCoordinate(ps)) if ps.len() == s.len => out.extend(ps.iter().copied()),
                Some(PriorSpec::PerCoordinate(ps)) => {
                    return Err(RunnerError::Config(format!(
                        "eki.priors.{} lists {} priors for {} coordinates",
                        s.name,
                        ps.len(),
                        s.len
                    )))
                }
            }
        }
        if let Some(extra) = self.priors.keys().find(|k| layout.slices.iter().all(|s| &s.name != *k)) {
            return Err(RunnerError::Config(format!("eki.priors.{extra} is not a fitted parameter")));
        }
        for p in &out {
            p.validate().map_err(RunnerError::Config)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    /// Validation run length as a multiple of the forward averaging window.
    #[serde(default = "default_factor")]
    pub length_factor: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Histogram range; defaults to the padded range of the data.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    /// Components compared; defaults to all observed components.
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    /// Lags for the ACF comparison files; defaults to the ACF statistics' lags.
    #[serde(default)]
    pub acf_lags: Option<Vec<f64>>,
    /// Points per fitted-function table.
    #[serde(default = "default_grid")]
    pub function_grid: usize,
}

fn default_factor() -> f64 {
    10.0
}
fn default_bins() -> usize {
    50
}
fn default_grid() -> usize {
    101
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            length_factor: default_factor(),
            bins: default_bins(),
            range: None,
            components: None,
            acf_lags: None,
            function_grid: default_grid(),
        }
    }
}

/// Overrides applied with `--smoke` to shrink an experiment to a quick check.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmokeConfig {
    #[serde(default)]
    pub data_duration: Option<f64>,
    #[serde(default)]
    pub forward_duration: Option<f64>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub max_gens: Option<usize>,
    #[serde(default)]
    pub ensemble_size: Option<usize>,
    #[serde(default)]
    pub n_batches: Option<usize>,
    #[serde(default)]
    pub length_factor: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // data paths are relative to the config file
        if let DataConfig::File { path: Some(p), .. } = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Checks that need more than the schema.
    pub fn validate(&self) -> Result<(), RunnerError> {
        let spec = self.statistics.to_spec()?;
        if spec.is_empty() {
            return Err(RunnerError::Config("statistics select nothing".into()));
        }
        self.eki.coordinate_priors(&self.model.layout())?;
        if let Some(truth) = self.truth() {
            truth.values()?;
        }
        if self.gamma.n_batches < 2 {
            return Err(RunnerError::Config("gamma.n_batches must be at least 2".into()));
        }
        if !(self.validation.length_factor > 0.0) || self.validation.bins == 0 {
            return Err(RunnerError::Config("validation needs a positive length factor and bins".into()));
        }
        self.forward.steps()?;
        Ok(())
    }

    /// The simulated truth or stand-in model, if any.
    pub fn truth(&self) -> Option<&TruthConfig> {
        match &self.data {
            DataConfig::Simulate { truth } => Some(truth),
            DataConfig::File { stand_in, .. } => stand_in.as_ref(),
        }
    }

    /// Apply the `[smoke]` overrides.
    pub fn smoke(mut self) -> Self {
        let s = self.smoke.clone();
        if let Some(d) = s.data_duration {
            match &mut self.data {
                DataConfig::Simulate { truth } => truth.simulation.duration = d,
                DataConfig::File { stand_in: Some(t), .. } => t.simulation.duration = d,
                DataConfig::File { .. } => {}
            }
        }
        if let Some(d) = s.forward_duration {
            self.forward.duration = d;
        }
        if let Some(b) = s.burn_in {
            self.statistics.burn_in = Some(b);
        }
        if let Some(g) = s.max_gens {
            self.eki.max_gens = g;
        }
        if let Some(n) = s.ensemble_size {
            self.eki.ensemble_size = Some(n);
        }
        if let Some(n) = s.n_batches {
            self.gamma.n_batches = n;
        }
        if let Some(f) = s.length_factor {
            self.validation.length_factor = f;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "demo"
seed = 3

[data]
source = "simulate"
[data.truth.model]
name = "lorenz63"
sigma = 10.0
[data.truth.simulation]
dt = 0.001
duration = 50.0

[statistics]
moment_groups = [{ components = [0, 1, 2], max_order = 2 }]

[model]
name = "lorenz63"
learn = ["alpha", "sigma"]

[forward]
dt = 0.001
duration = 50.0

[eki.priors]
alpha = { kind = "uniform", lo = 1.0, hi = 20.0 }
sigma = { kind = "uniform", lo = 1.0, hi = 30.0 }
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.statistics.to_spec().unwrap().len(), 9);
        assert_eq!(cfg.eki.max_gens, 30);
        assert!(cfg.eki.perturb);
        assert_eq!(cfg.gamma.n_batches, 20);
        assert_eq!(cfg.validation.length_factor, 10.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = MINIMAL.replace("seed = 3", "seed = 3\nsede = 4");
        match ExperimentConfig::from_toml(&bad) {
            Err(RunnerError::Config(msg)) => assert!(msg.contains("sede"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("duration = 50.0\n\n[eki", "duration = 50.0\nstep = 1\n\n[eki");
        match ExperimentConfig::from_toml(&bad) {
            Err(RunnerError::Config(msg)) => assert!(msg.contains("step"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_prior_is_a_config_error() {
        let bad = MINIMAL.replace("sigma = { kind = \"uniform\", lo = 1.0, hi = 30.0 }", "");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(RunnerError::Config(m)) if m.contains("sigma")));
    }

    #[test]
    fn smoke_overrides_apply() {
        let text = format!("{MINIMAL}\n[smoke]\nforward_duration = 5.0\nmax_gens = 2\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap().smoke();
        assert_eq!(cfg.forward.duration, 5.0);
        assert_eq!(cfg.eki.max_gens, 2);
    }
}
