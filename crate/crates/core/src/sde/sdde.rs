use crate::rng::{fill_standard_normal, RngStream};

use super::{SddeModel, SdeError, StepConfig, Trajectory};

/// Euler–Maruyama for delay equations. Delayed states come from linear
/// interpolation of the seed history followed by the computed solution.
///
/// The last history row is the state at time 0 and becomes row 0 of the
/// output; earlier history rows are not returned.
pub fn integrate_sdde<M: SddeModel + ?Sized>(
    model: &M,
    history: &Trajectory,
    steps: StepConfig,
    stream: RngStream,
) -> Result<Trajectory, SdeError> {
    steps.validate()?;
    let n = model.dim();
    let dt = steps.dt;
    if history.dim() != n {
        return Err(SdeError::InvalidSettings(format!(
            "history has {} components, model has {n}",
            history.dim()
        )));
    }
    if (history.dt() - dt).abs() > 1e-9 * dt {
        return Err(SdeError::InvalidSettings(format!(
            "history spacing {} differs from dt {dt}",
            history.dt()
        )));
    }
    let delays = model.delays();
    if let Some(bad) = delays.iter().find(|&&tau| !(tau > 0.0 && tau.is_finite())) {
        return Err(SdeError::InvalidSettings(format!("delay {bad} is not positive")));
    }
    let max_delay = delays.iter().cloned().fold(0.0, f64::max);
    let available = history.duration();
    if available + 1e-9 * dt < max_delay {
        return Err(SdeError::InsufficientHistory {
            needed: max_delay,
            available,
        });
    }

    // Delay offsets in steps, snapped to integers when within round-off.
    let lags: Vec<(usize, f64)> = delays
        .iter()
        .map(|&tau| {
            let p = tau / dt;
            let r = p.round();
            if (p - r).abs() < 1e-9 * p.max(1.0) {
                (r as usize, 0.0)
            } else {
                let fl = p.floor();
                (fl as usize, p - fl)
            }
        })
        .collect();

    // Ring buffer wide enough to reach `max lag + 1` steps back.
    let cap = lags.iter().map(|&(k, w)| k + usize::from(w > 0.0)).max().unwrap_or(0) + 1;
    let mut ring = vec![0.0; cap * n];
    let h = history.len();
    let keep = cap.min(h);
    // Global index g maps to ring slot g % cap; the present is g = h - 1.
    for g in (h - keep)..h {
        let slot = g % cap;
        ring[slot * n..(slot + 1) * n].copy_from_slice(history.row(g));
    }
    let mut g = h - 1;

    let deterministic = model.is_deterministic();
    let sqdt = dt.sqrt();
    let mut rng = stream.generator();
    let mut x = history.last().to_vec();
    let mut out = Vec::with_capacity(steps.output_rows() * n);
    out.extend_from_slice(&x);
    let mut delayed = vec![0.0; lags.len() * n];
    let mut f = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut noise = vec![0.0; n];

    for step in 1..=steps.n_steps {
        for (d, &(k, w)) in lags.iter().enumerate() {
            let dst = &mut delayed[d * n..(d + 1) * n];
            // x(t - τ) with t - τ = (g - k - w) dt
            let a = (g - k) % cap;
            if w == 0.0 {
                dst.copy_from_slice(&ring[a * n..(a + 1) * n]);
            } else {
                let b = (g - k - 1) % cap;
                for i in 0..n {
                    dst[i] = (1.0 - w) * ring[a * n + i] + w * ring[b * n + i];
                }
            }
        }
        model.drift(&x, &delayed, &mut f);
        if deterministic {
            for i in 0..n {
                x[i] += dt * f[i];
            }
        } else {
            fill_standard_normal(&mut rng, &mut xi);
            model.diffuse(&x, &xi, &mut noise);
            for i in 0..n {
                x[i] += dt * f[i] + sqdt * noise[i];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteState { step });
        }
        g += 1;
        let slot = g % cap;
        ring[slot * n..(slot + 1) * n].copy_from_slice(&x);
        if step % steps.stride == 0 {
            out.extend_from_slice(&x);
        }
    }
    Ok(Trajectory::from_parts_unchecked(
        dt * steps.stride as f64,
        0.0,
        n,
        out,
    ))
}
