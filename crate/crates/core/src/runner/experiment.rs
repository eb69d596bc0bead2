use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::eki::{run_eki, sample_initial_ensemble, EkiSettings, ForwardError, ForwardModel, InverseProblem};
use crate::funcparam::{ParameterLayout, ParameterValues};
use crate::models::{padded_range, ModelConfig, SimSettings};
use crate::observables::{assemble_data, compute_acf, estimate_gamma, DataVector, StatisticsSpec};
use crate::rng::{RngStream, StreamPurpose};
use crate::sde::Trajectory;

use super::bundle::{AcfRow, ComparisonRow, FunctionRow, HistogramRow, ResultBundle, Summary};
use super::config::{DataConfig, ExperimentConfig, GammaStructure, TruthConfig};
use super::emit::{compare_invariant_measures, emit_histogram, Histogram};
use super::ingest::{ingest_timeseries, ColumnRef};
use super::RunnerError;

/// Command-line style overrides of an experiment config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Apply the config's `[smoke]` section.
    pub smoke: bool,
    /// Read file-backed data instead of the synthetic stand-in.
    pub with_data: bool,
}

impl RunOptions {
    fn apply(&self, config: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = if self.smoke { config.clone().smoke() } else { config.clone() };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        cfg
    }
}

/// Statistics of a model run at unconstrained parameters.
pub struct ModelForward {
    pub model: ModelConfig,
    pub layout: ParameterLayout,
    pub sim: SimSettings,
    pub spec: StatisticsSpec,
    /// Components passed to the statistics; all when `None`.
    pub observe: Option<Vec<usize>>,
}

impl ModelForward {
    /// Simulate at raw parameter values and project onto the observed components.
    pub fn trajectory(&self, params: &ParameterValues, sim: &SimSettings, stream: RngStream) -> Result<Trajectory, RunnerError> {
        let traj = self.model.simulate(params, sim, stream)?;
        Ok(match &self.observe {
            Some(c) => traj.project(c),
            None => traj,
        })
    }
}

impl ForwardModel for ModelForward {
    fn data_dim(&self) -> usize {
        self.spec.len()
    }

    fn evaluate(&self, theta: &[f64], stream: RngStream) -> Result<Vec<f64>, ForwardError> {
        let params = self.layout.unpack(theta).map_err(ForwardError::new)?;
        let traj = self.trajectory(&params, &self.sim, stream).map_err(ForwardError::new)?;
        let data = assemble_data(&traj, &self.spec).map_err(ForwardError::new)?;
        Ok(data.values)
    }
}

/// Truth data: the observed trajectory and its statistics with `Γ` from batch means.
pub struct TruthOutput {
    pub trajectory: Trajectory,
    pub data: DataVector,
}

fn observed_components(model: &ModelConfig, observe: &Option<Vec<usize>>) -> Option<Vec<usize>> {
    observe.clone().or_else(|| model.default_observed())
}

fn simulate_stand_in(truth: &TruthConfig, seed: u64) -> Result<Trajectory, RunnerError> {
    let params = truth.values()?;
    let stream = RngStream::derived(seed, StreamPurpose::Truth, 0, 0);
    let traj = truth.model.simulate(&params, &truth.simulation, stream)?;
    Ok(match observed_components(&truth.model, &truth.observe) {
        Some(c) => traj.project(&c),
        None => traj,
    })
}

fn load_data(cfg: &ExperimentConfig, with_data: bool) -> Result<Trajectory, RunnerError> {
    match &cfg.data {
        DataConfig::Simulate { truth } => simulate_stand_in(truth, cfg.seed),
        DataConfig::File {
            path,
            column,
            sampling_interval,
            remove_mean,
            stand_in,
        } => {
            if with_data {
                let path = path
                    .as_ref()
                    .ok_or_else(|| RunnerError::Config("data.path is required with real data".into()))?;
                ingest_timeseries(path, &ColumnRef::from(column.as_str()), *sampling_interval, *remove_mean)
            } else {
                let truth = stand_in.as_ref().ok_or_else(|| {
                    RunnerError::DataFile("no data file requested and no stand-in model configured".into())
                })?;
                let mut traj = simulate_stand_in(truth, cfg.seed)?;
                if *remove_mean {
                    let x = traj.column(0);
                    let mean = x.iter().sum::<f64>() / x.len() as f64;
                    traj = Trajectory::from_series(traj.dt(), traj.t0(), x.iter().map(|v| v - mean).collect())
                        .map_err(|e| RunnerError::DataFile(e.to_string()))?;
                }
                Ok(traj)
            }
        }
    }
}

/// Length of the post-burn-in averaging window of a run lasting `duration`.
fn window_length(spec: &StatisticsSpec, duration: f64) -> f64 {
    spec.averaging_window.unwrap_or(duration - spec.burn_in_for(duration))
}

/// Statistics of `traj` with a batch-means `Γ`; `forward_window` adds the
/// sampling noise of a forward average over that length.
pub fn compute_statistics(
    traj: &Trajectory,
    spec: &StatisticsSpec,
    n_batches: usize,
    structure: GammaStructure,
    forward_window: Option<f64>,
) -> Result<DataVector, RunnerError> {
    let data = assemble_data(traj, spec)?;
    let mut gamma = estimate_gamma(traj, spec, n_batches)?;
    if let Some(w_fwd) = forward_window {
        if !(w_fwd > 0.0) {
            return Err(RunnerError::Config(format!("forward averaging window {w_fwd} must be positive")));
        }
        let w_data = window_length(spec, traj.duration());
        gamma *= 1.0 + w_data / w_fwd;
    }
    if structure == GammaStructure::Diagonal {
        gamma = DMatrix::from_diagonal(&gamma.diagonal());
    }
    Ok(data.with_gamma(gamma))
}

fn resolve(cfg: &ExperimentConfig, with_data: bool) -> Result<(Trajectory, DataVector, StatisticsSpec), RunnerError> {
    let spec = cfg.statistics.to_spec()?;
    let traj = load_data(cfg, with_data)?;
    spec.validate(traj.dim())?;
    let fwd_window = window_length(&spec, cfg.forward.duration);
    let data = compute_statistics(
        &traj,
        &spec,
        cfg.gamma.n_batches,
        cfg.gamma.structure,
        cfg.gamma.include_forward_noise.then_some(fwd_window),
    )?;
    Ok((traj, data, spec))
}

/// Generate (or ingest) the data of an experiment without fitting anything.
pub fn simulate_truth(config: &ExperimentConfig, options: &RunOptions) -> Result<TruthOutput, RunnerError> {
    let cfg = options.apply(config);
    cfg.validate()?;
    let (trajectory, data, _) = resolve(&cfg, options.with_data)?;
    Ok(TruthOutput { trajectory, data })
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| Path::new("results").join(&cfg.name))
}

/// Fit the configured model and write a [`ResultBundle`].
///
/// Steps: obtain `y` and `Γ`; draw the initial ensemble; iterate EKI;
/// simulate the fitted model at the final ensemble mean for a long
/// validation run; compare it with the truth and write every file.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ResultBundle, RunnerError> {
    let cfg = options.apply(config);
    cfg.validate()?;
    let (data_traj, data, spec) = resolve(&cfg, options.with_data)?;

    let mut model = cfg.model.clone();
    model.resolve_node_ranges(&data_traj);
    let layout = model.layout();
    let forward = ModelForward {
        observe: model.default_observed(),
        model: model.clone(),
        layout: layout.clone(),
        sim: cfg.forward.clone(),
        spec: spec.clone(),
    };
    let fwd_dim = forward.observe.as_ref().map_or(model.state_dim(), |c| c.len());
    if fwd_dim != data_traj.dim() {
        return Err(RunnerError::Config(format!(
            "{} observes {fwd_dim} components but the data have {}",
            model.name(),
            data_traj.dim()
        )));
    }
    let problem = InverseProblem::new(forward, data.clone(), layout.clone())?;

    let priors = cfg.eki.coordinate_priors(&layout)?;
    let j_ens = cfg
        .eki
        .ensemble_size
        .unwrap_or_else(|| EkiSettings::default_ensemble_size(layout.dim()));
    let init = sample_initial_ensemble(&priors, &layout, j_ens, RngStream::derived(cfg.seed, StreamPurpose::Prior, 0, 0))?;
    let settings = EkiSettings {
        max_gens: cfg.eki.max_gens,
        perturb: cfg.eki.perturb,
        stop: cfg.eki.stop,
        seed: cfg.seed,
        eval_budget: cfg.eki.eval_budget,
    };
    let history = run_eki(&problem, init, &settings)?;
    let mean = history.final_mean();
    let fitted = layout.unpack(&mean).map_err(crate::models::ModelError::from)?;
    let forward = &problem.forward;

    let comparison_stats = forward
        .evaluate(&mean, RngStream::derived(cfg.seed, StreamPurpose::Validation, 0, 0))
        .map_err(|e| crate::eki::EkiError::ForwardFailed(e.0))?;
    let comparison = data
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| ComparisonRow {
            label: label.clone(),
            data: data.values[i],
            fitted: comparison_stats[i],
            gamma_sd: data.gamma[(i, i)].max(0.0).sqrt(),
        })
        .collect();

    // long validation runs
    let val_window = cfg.validation.length_factor * window_length(&spec, cfg.forward.duration);
    let val_sim = |base: &SimSettings| {
        let mut s = base.clone();
        s.duration = spec.burn_in_for(base.duration) + val_window;
        s
    };
    let after_burn_in = |traj: Trajectory, base: &SimSettings| -> Result<Trajectory, RunnerError> {
        let skip = (spec.burn_in_for(base.duration) / traj.dt()).ceil() as usize;
        if skip + 2 > traj.len() {
            return Err(RunnerError::Config("validation run is shorter than its burn-in".into()));
        }
        Ok(traj.slice_rows(skip, traj.len()))
    };
    let fitted_val = after_burn_in(
        forward.trajectory(&fitted, &val_sim(&cfg.forward), RngStream::derived(cfg.seed, StreamPurpose::Validation, 1, 0))?,
        &cfg.forward,
    )?;
    let truth_val = match &cfg.data {
        DataConfig::Simulate { truth } => {
            let params = truth.values()?;
            let sim = val_sim(&truth.simulation);
            let traj = truth
                .model
                .simulate(&params, &sim, RngStream::derived(cfg.seed, StreamPurpose::Validation, 1, 1))?;
            let traj = match observed_components(&truth.model, &truth.observe) {
                Some(c) => traj.project(&c),
                None => traj,
            };
            after_burn_in(traj, &truth.simulation)?
        }
        DataConfig::File { .. } => spec.window(&data_traj)?,
    };

    let components = cfg
        .validation
        .components
        .clone()
        .unwrap_or_else(|| (0..data_traj.dim()).collect());
    if let Some(&c) = components.iter().find(|&&c| c >= data_traj.dim()) {
        return Err(RunnerError::Config(format!("validation component {c} is not observed")));
    }
    let range = match cfg.validation.range {
        Some([lo, hi]) if hi > lo => (lo, hi),
        Some([lo, hi]) => return Err(RunnerError::Config(format!("validation range [{lo}, {hi}] is empty"))),
        None => {
            let [lo, hi] = padded_range(&truth_val, &components);
            (lo, hi)
        }
    };
    let mut histograms = Vec::new();
    let mut push_rows = |component: Option<usize>, ht: &Histogram, hf: &Histogram| {
        for i in 0..ht.masses.len() {
            histograms.push(HistogramRow {
                component,
                bin_lo: ht.edges[i],
                bin_hi: ht.edges[i + 1],
                truth: ht.masses[i],
                fitted: hf.masses[i],
            });
        }
    };
    let mut tv = Vec::new();
    for &c in &components {
        let ht = emit_histogram(&truth_val, c, cfg.validation.bins, range);
        let hf = emit_histogram(&fitted_val, c, cfg.validation.bins, range);
        tv.push(compare_invariant_measures(&ht, &hf)?);
        push_rows(Some(c), &ht, &hf);
    }
    let pooled = |t: &Trajectory| -> Vec<f64> { components.iter().flat_map(|&c| t.column(c)).collect() };
    let ht = Histogram::from_samples(&pooled(&truth_val), cfg.validation.bins, range);
    let hf = Histogram::from_samples(&pooled(&fitted_val), cfg.validation.bins, range);
    let tv_pooled = compare_invariant_measures(&ht, &hf)?;
    push_rows(None, &ht, &hf);

    let mut acf = Vec::new();
    for &c in &components {
        let lags = acf_lags(&cfg, &spec, c, truth_val.dt());
        let truth_acf = compute_acf(&truth_val, c, &lags)?;
        let fitted_acf = compute_acf(&fitted_val, c, &lags)?;
        for (k, &lag) in lags.iter().enumerate() {
            acf.push(AcfRow {
                component: c,
                lag,
                truth: truth_acf[k],
                fitted: fitted_acf[k],
            });
        }
    }

    let truth_functions = match cfg.truth() {
        Some(t) => t.values().and_then(|v| Ok(t.model.functions(&v)?)).unwrap_or_default(),
        None => Vec::new(),
    };
    let mut functions = Vec::new();
    let n_grid = cfg.validation.function_grid.max(2);
    for f in model.functions(&fitted)? {
        let truth = truth_functions.iter().find(|t| t.name == f.name);
        let (lo, hi) = f.domain;
        for i in 0..n_grid {
            let x = lo + (hi - lo) * i as f64 / (n_grid - 1) as f64;
            functions.push(FunctionRow {
                function: f.name.clone(),
                x,
                fitted: f.function.value(x),
                truth: truth.map(|t| t.function.value(x)),
            });
        }
    }

    let truth_raw = cfg.truth().and_then(|t| {
        let same = t.model.name() == model.name() && t.model.layout() == layout;
        same.then(|| t.values().ok().and_then(|v| layout.pack(&v).ok()).map(|u| to_raw(&layout, &u)))
            .flatten()
    });
    let misfits = history.misfits();
    let summary = Summary {
        name: cfg.name.clone(),
        model: model.name().to_string(),
        seed: cfg.seed,
        ensemble_size: j_ens,
        generations: history.records.len().saturating_sub(1),
        stopped_early: history.stopped_early,
        data_dim: data.len(),
        parameter_names: layout.coordinate_names(),
        final_mean: to_raw(&layout, &mean),
        truth: truth_raw,
        initial_misfit: misfits.first().copied().unwrap_or(f64::NAN),
        final_misfit: misfits.last().copied().unwrap_or(f64::NAN),
        tv_components: components,
        tv,
        tv_pooled,
        validation_duration: val_window,
    };

    let bundle = ResultBundle {
        dir: output_dir(&cfg),
        data,
        history: history.records.clone(),
        final_ensemble: history.final_ensemble.clone(),
        comparison,
        histograms,
        acf,
        functions,
        summary,
    };
    bundle.write(&history, &layout)?;
    Ok(bundle)
}

fn to_raw(layout: &ParameterLayout, u: &[f64]) -> Vec<f64> {
    layout
        .coordinate_transforms()
        .iter()
        .zip(u)
        .map(|(t, &v)| t.to_raw(v))
        .collect()
}

/// Lags for the ACF comparison: configured, else those of the statistics
/// for this component, else 20 lags spaced ten samples apart. Lag 0 is always first.
fn acf_lags(cfg: &ExperimentConfig, spec: &StatisticsSpec, component: usize, dt: f64) -> Vec<f64> {
    let mut lags: Vec<f64> = match &cfg.validation.acf_lags {
        Some(l) => l.clone(),
        None => {
            let own: Vec<f64> = spec
                .acf
                .iter()
                .filter(|a| a.component == component)
                .flat_map(|a| a.lags.iter().copied())
                .collect();
            if own.is_empty() {
                (1..=20).map(|k| 10.0 * k as f64 * dt).collect()
            } else {
                own
            }
        }
    };
    if lags.first() != Some(&0.0) {
        lags.insert(0, 0.0);
    }
    lags
}
