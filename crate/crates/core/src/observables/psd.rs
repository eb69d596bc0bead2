use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::sde::Trajectory;

use super::{ObservableError, PsdRequest};

/// Shortest Welch segment accepted for a spectral fit.
const MIN_SEGMENT: usize = 16;

/// One-sided Welch PSD estimate.
#[derive(Debug, Clone)]
pub struct WelchEstimate {
    pub frequencies: Vec<f64>,
    pub density: Vec<f64>,
    pub segment_len: usize,
    pub segments_used: usize,
}

/// Welch-averaged periodogram: Hann window, 50% overlap, segment length
/// chosen so that exactly `segments` segments tile the series. Each segment
/// is mean-detrended; the result is a one-sided density per unit frequency.
pub fn welch_psd(series: &[f64], dt: f64, segments: usize) -> Result<WelchEstimate, ObservableError> {
    if segments == 0 {
        return Err(ObservableError::InvalidSpec("Welch needs at least one segment".into()));
    }
    let n = series.len();
    let seg_len = 2 * n / (segments + 1);
    if seg_len < MIN_SEGMENT {
        return Err(ObservableError::WindowTooShort(format!(
            "{n} samples cannot hold {segments} Welch segments of at least {MIN_SEGMENT}"
        )));
    }
    let hop = (seg_len / 2).max(1);
    let count = (n - seg_len) / hop + 1;

    let window: Vec<f64> = (0..seg_len)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / seg_len as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg_len);
    let bins = seg_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); seg_len];
    for s in 0..count {
        let seg = &series[s * hop..s * hop + seg_len];
        let mean = seg.iter().sum::<f64>() / seg_len as f64;
        for (b, (&x, &w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf[..bins]) {
            *a += c.norm_sqr();
        }
    }

    let scale = dt / (window_power * count as f64);
    let nyquist_bin = if seg_len % 2 == 0 { Some(seg_len / 2) } else { None };
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            one_sided * a * scale
        })
        .collect();
    let df = 1.0 / (seg_len as f64 * dt);
    Ok(WelchEstimate {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        density,
        segment_len: seg_len,
        segments_used: count,
    })
}

/// Least-squares polynomial coefficients (constant term first) of
/// `log10 PSD(f)` against frequency `f` over `band`.
///
/// The default band runs from the third Welch bin to a quarter of the
/// sampling rate (half the Nyquist frequency).
pub fn compute_psd_polyfit(
    traj: &Trajectory,
    component: usize,
    degree: usize,
    band: Option<(f64, f64)>,
) -> Result<Vec<f64>, ObservableError> {
    polyfit_request(
        traj,
        &PsdRequest {
            component,
            degree,
            band,
            segments: 8,
        },
    )
}

pub(crate) fn polyfit_request(traj: &Trajectory, req: &PsdRequest) -> Result<Vec<f64>, ObservableError> {
    if req.component >= traj.dim() {
        return Err(ObservableError::InvalidSpec(format!(
            "component {} out of range for dimension {}",
            req.component,
            traj.dim()
        )));
    }
    let est = welch_psd(&traj.column(req.component), traj.dt(), req.segments)?;
    let nyquist = 0.5 / traj.dt();
    let (lo, hi) = req
        .band
        .unwrap_or((est.frequencies[2.min(est.frequencies.len() - 1)], 0.5 * nyquist));
    if !(lo >= 0.0 && hi > lo && hi <= nyquist * (1.0 + 1e-12)) {
        return Err(ObservableError::InvalidSpec(format!(
            "band [{lo}, {hi}] must lie inside (0, {nyquist}]"
        )));
    }
    let (freqs, logs): (Vec<f64>, Vec<f64>) = est
        .frequencies
        .iter()
        .zip(&est.density)
        .filter(|(&f, &p)| f >= lo && f <= hi && p > 0.0)
        .map(|(&f, &p)| (f, p.log10()))
        .unzip();
    if freqs.len() < req.degree + 1 {
        return Err(ObservableError::EmptyBand { lo, hi });
    }
    Ok(polyfit(&freqs, &logs, req.degree))
}

/// Least-squares fit of `y ≈ Σ c_k x^k`, solved on `x / max|x|` and rescaled.
pub(crate) fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let m = degree + 1;
    let mut normal = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut powers = vec![0.0; m];
    for (&xi, &yi) in x.iter().zip(y) {
        let u = xi / scale;
        let mut p = 1.0;
        for pk in powers.iter_mut() {
            *pk = p;
            p *= u;
        }
        for r in 0..m {
            rhs[r] += powers[r] * yi;
            for c in 0..m {
                normal[(r, c)] += powers[r] * powers[c];
            }
        }
    }
    let coef = match normal.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => normal
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .expect("SVD solve of normal equations"),
    };
    coef.iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect()
}
