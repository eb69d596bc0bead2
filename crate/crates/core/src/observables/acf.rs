use crate::sde::Trajectory;

use super::ObservableError;

/// Normalized autocorrelation of one component at the given lag times.
///
/// The series is mean-centred and both the lagged products and the lag-0
/// variance are divided by the full sample count, so `|acf| <= 1`. A
/// constant series has no correlation structure: it reports 1 at lag 0
/// and 0 elsewhere.
pub fn compute_acf(traj: &Trajectory, component: usize, lags: &[f64]) -> Result<Vec<f64>, ObservableError> {
    if component >= traj.dim() {
        return Err(ObservableError::InvalidSpec(format!(
            "component {component} out of range for dimension {}",
            traj.dim()
        )));
    }
    let steps = lag_steps(lags, traj.dt())?;
    let n = traj.len();
    if let Some(&too_long) = steps.iter().find(|&&k| k >= n) {
        return Err(ObservableError::WindowTooShort(format!(
            "lag of {too_long} samples needs more than {n} samples"
        )));
    }
    let x = traj.column(component);
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = centred.iter().map(|v| v * v).sum::<f64>();
    Ok(steps
        .iter()
        .map(|&k| {
            if var == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            if k == 0 {
                return 1.0;
            }
            let cov: f64 = centred[..n - k].iter().zip(&centred[k..]).map(|(a, b)| a * b).sum();
            cov / var
        })
        .collect())
}

fn lag_steps(lags: &[f64], dt: f64) -> Result<Vec<usize>, ObservableError> {
    lags.iter()
        .map(|&lag| {
            if !(lag >= 0.0 && lag.is_finite()) {
                return Err(ObservableError::InvalidSpec(format!("lag {lag} must be non-negative")));
            }
            let p = lag / dt;
            let k = p.round();
            if (p - k).abs() > 1e-6 * k.max(1.0) {
                return Err(ObservableError::InvalidSpec(format!(
                    "lag {lag} is not a multiple of the sample spacing {dt}"
                )));
            }
            Ok(k as usize)
        })
        .collect()
}
