//! Finite-time-average statistics of trajectories and their sampling covariance.
//!
//! A [`StatisticsSpec`] lists which statistics make up the data vector:
//! product moments, normalized autocorrelation samples, and coefficients of
//! a polynomial fit to the log power spectral density, always concatenated
//! in that order.

mod acf;
mod gamma;
mod moments;
mod psd;

pub use acf::compute_acf;
pub use gamma::estimate_gamma;
pub use moments::compute_moments;
pub use psd::{compute_psd_polyfit, welch_psd, WelchEstimate};

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sde::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("averaging window too short: {0}")]
    WindowTooShort(String),
    #[error("no spectral bins in band [{lo}, {hi}]")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("invalid statistics spec: {0}")]
    InvalidSpec(String),
    #[error("observation file: {0}")]
    Io(String),
}

/// Autocorrelation samples of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcfRequest {
    pub component: usize,
    /// Lag times; each must be a non-negative multiple of the trajectory spacing.
    pub lags: Vec<f64>,
}

/// Polynomial fit to `log10` of the Welch PSD of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdRequest {
    pub component: usize,
    pub degree: usize,
    /// Frequency band `[lo, hi]`; defaults to the third Welch bin up to half the Nyquist frequency.
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_segments() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsSpec {
    /// Each entry is a multiset of component indices; its statistic is the
    /// time average of the product of those components.
    #[serde(default)]
    pub moments: Vec<Vec<usize>>,
    #[serde(default)]
    pub acf: Vec<AcfRequest>,
    #[serde(default)]
    pub psd: Vec<PsdRequest>,
    /// Discarded initial time. `None` means the larger of 10% of the
    /// trajectory and 10 time units.
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Length of the averaging window after burn-in; `None` uses everything.
    #[serde(default)]
    pub averaging_window: Option<f64>,
}

/// Every multiset of `components` with cardinality `1..=max_order`, ordered by cardinality.
pub fn all_moment_terms(components: &[usize], max_order: usize) -> Vec<Vec<usize>> {
    fn extend(components: &[usize], start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..components.len() {
            cur.push(components[i]);
            extend(components, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for order in 1..=max_order {
        extend(components, 0, order, &mut Vec::new(), &mut out);
    }
    out
}

/// Powers `x_c^m` for `m in 1..=max_order`, grouped by order.
pub fn marginal_moment_terms(components: &[usize], max_order: usize) -> Vec<Vec<usize>> {
    (1..=max_order)
        .flat_map(|m| components.iter().map(move |&c| vec![c; m]))
        .collect()
}

impl StatisticsSpec {
    /// Number of entries in the assembled data vector.
    pub fn len(&self) -> usize {
        self.moments.len()
            + self.acf.iter().map(|a| a.lags.len()).sum::<usize>()
            + self.psd.iter().map(|p| p.degree + 1).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.len());
        for m in &self.moments {
            let idx: Vec<String> = m.iter().map(|c| c.to_string()).collect();
            labels.push(format!("moment[{}]", idx.join(",")));
        }
        for a in &self.acf {
            for lag in &a.lags {
                labels.push(format!("acf[{}]@{}", a.component, lag));
            }
        }
        for p in &self.psd {
            for k in 0..=p.degree {
                labels.push(format!("psd[{}].c{}", p.component, k));
            }
        }
        labels
    }

    /// Largest component index referenced, if any.
    pub fn max_component(&self) -> Option<usize> {
        self.moments
            .iter()
            .flatten()
            .copied()
            .chain(self.acf.iter().map(|a| a.component))
            .chain(self.psd.iter().map(|p| p.component))
            .max()
    }

    pub fn validate(&self, dim: usize) -> Result<(), ObservableError> {
        if let Some(c) = self.max_component() {
            if c >= dim {
                return Err(ObservableError::InvalidSpec(format!(
                    "component {c} out of range for dimension {dim}"
                )));
            }
        }
        if self.moments.iter().any(|m| m.is_empty()) {
            return Err(ObservableError::InvalidSpec("empty moment term".into()));
        }
        if self.acf.iter().flat_map(|a| &a.lags).any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(ObservableError::InvalidSpec("lags must be non-negative".into()));
        }
        if let Some(w) = self.averaging_window {
            if !(w > 0.0) {
                return Err(ObservableError::InvalidSpec("averaging window must be positive".into()));
            }
        }
        if let Some(b) = self.burn_in {
            if !(b >= 0.0) {
                return Err(ObservableError::InvalidSpec("burn-in must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Burn-in time applied to a trajectory of the given duration.
    pub fn burn_in_for(&self, duration: f64) -> f64 {
        self.burn_in.unwrap_or_else(|| (0.1 * duration).max(10.0))
    }

    /// The post-burn-in averaging window of `traj`.
    pub fn window(&self, traj: &Trajectory) -> Result<Trajectory, ObservableError> {
        let dt = traj.dt();
        let burn = self.burn_in_for(traj.duration());
        let skip = (burn / dt - 1e-9).ceil().max(0.0) as usize;
        if skip + 1 >= traj.len() {
            return Err(ObservableError::WindowTooShort(format!(
                "burn-in of {burn} leaves no samples in a trajectory of duration {}",
                traj.duration()
            )));
        }
        let end = match self.averaging_window {
            None => traj.len(),
            Some(w) => {
                let rows = (w / dt - 1e-9).ceil() as usize + 1;
                if skip + rows > traj.len() {
                    return Err(ObservableError::WindowTooShort(format!(
                        "need {w} time units after burn-in, have {}",
                        traj.duration() - skip as f64 * dt
                    )));
                }
                skip + rows
            }
        };
        Ok(traj.slice_rows(skip, end))
    }

    /// Statistics of an already-windowed trajectory, in assembly order.
    pub(crate) fn evaluate_window(&self, window: &Trajectory) -> Result<Vec<f64>, ObservableError> {
        let mut values = Vec::with_capacity(self.len());
        values.extend(moments::moments_of(window, &self.moments));
        for a in &self.acf {
            values.extend(compute_acf(window, a.component, &a.lags)?);
        }
        for p in &self.psd {
            values.extend(psd::polyfit_request(window, p)?);
        }
        Ok(values)
    }
}

/// Observation vector `y` with its noise covariance `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
    pub gamma: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct DataVectorFile {
    values: Vec<f64>,
    labels: Vec<String>,
    gamma: Vec<Vec<f64>>,
}

/// Diagonal jitter added to `Γ` before it is factorized: `1e-8 · trace(Γ) / J`.
pub const GAMMA_JITTER: f64 = 1e-8;

impl DataVector {
    /// Values with a zero covariance, to be filled by [`estimate_gamma`].
    pub fn without_gamma(values: Vec<f64>, labels: Vec<String>) -> Self {
        let j = values.len();
        Self {
            values,
            labels,
            gamma: DMatrix::zeros(j, j),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_gamma(mut self, gamma: DMatrix<f64>) -> Self {
        assert_eq!(gamma.nrows(), self.values.len());
        assert_eq!(gamma.ncols(), self.values.len());
        self.gamma = gamma;
        self
    }

    /// `Γ + jitter·I` with the jitter policy applied.
    pub fn regularized_gamma(&self) -> DMatrix<f64> {
        let j = self.values.len().max(1) as f64;
        let scale = self.gamma.trace() / j;
        let jitter = if scale > 0.0 { GAMMA_JITTER * scale } else { 1e-12 };
        let mut g = self.gamma.clone();
        for i in 0..g.nrows() {
            g[(i, i)] += jitter;
        }
        g
    }

    pub fn to_json(&self) -> String {
        let file = DataVectorFile {
            values: self.values.clone(),
            labels: self.labels.clone(),
            gamma: self
                .gamma
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("data vector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ObservableError> {
        let file: DataVectorFile =
            serde_json::from_str(text).map_err(|e| ObservableError::Io(e.to_string()))?;
        let j = file.values.len();
        if file.labels.len() != j || file.gamma.len() != j || file.gamma.iter().any(|r| r.len() != j) {
            return Err(ObservableError::Io(format!(
                "inconsistent sizes: {} values, {} labels, {} gamma rows",
                j,
                file.labels.len(),
                file.gamma.len()
            )));
        }
        let gamma = DMatrix::from_fn(j, j, |r, c| file.gamma[r][c]);
        Ok(Self {
            values: file.values,
            labels: file.labels,
            gamma,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ObservableError> {
        std::fs::write(path, self.to_json()).map_err(|e| ObservableError::Io(e.to_string()))
    }

    pub fn read_json(path: &Path) -> Result<Self, ObservableError> {
        let text = std::fs::read_to_string(path).map_err(|e| ObservableError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}

/// Statistics of `traj` per `spec`: moments, then ACF samples, then PSD coefficients.
pub fn assemble_data(traj: &Trajectory, spec: &StatisticsSpec) -> Result<DataVector, ObservableError> {
    spec.validate(traj.dim())?;
    let window = spec.window(traj)?;
    let values = spec.evaluate_window(&window)?;
    Ok(DataVector::without_gamma(values, spec.labels()))
}
