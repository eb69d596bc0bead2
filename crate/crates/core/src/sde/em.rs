use crate::rng::{fill_standard_normal, RngStream};

use super::{SdeError, SdeModel, StepConfig, Trajectory};

/// Euler–Maruyama: `x_{k+1} = x_k + f(x_k) dt + sqrt(Σ(x_k)) sqrt(dt) ξ_k`.
///
/// Returns `n_steps / stride + 1` rows starting at `x0` (time 0).
pub fn integrate_em<M: SdeModel + ?Sized>(
    model: &M,
    x0: &[f64],
    steps: StepConfig,
    stream: RngStream,
) -> Result<Trajectory, SdeError> {
    steps.validate()?;
    let n = model.dim();
    if x0.len() != n {
        return Err(SdeError::InvalidSettings(format!(
            "initial state has {} components, model has {n}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SdeError::NonFiniteState { step: 0 });
    }

    let deterministic = model.is_deterministic();
    let dt = steps.dt;
    let sqdt = dt.sqrt();
    let mut rng = stream.generator();

    let mut out = Vec::with_capacity(steps.output_rows() * n);
    out.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut noise = vec![0.0; n];

    for step in 1..=steps.n_steps {
        model.drift(&x, &mut f);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{FnSde, OrnsteinUhlenbeck};

    fn sample_variance(xs: &[f64]) -> f64 {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn no_drift_no_noise_is_constant() {
        let model = FnSde {
            dim: 3,
            drift: |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0),
            diffusion: |_: &[f64], _: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0),
            deterministic: false,
        };
        let traj = integrate_em(&model, &[1.0, 2.0, 3.0], StepConfig::new(0.37, 10), RngStream::new(1, 0)).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.rows().all(|r| r == [1.0, 2.0, 3.0]));
    }

    #[test]
    fn zero_noise_matches_forward_euler_bitwise() {
        let drift = |x: &[f64], out: &mut [f64]| {
            out[0] = 10.0 * (x[1] - x[0]);
            out[1] = x[0] * (28.0 - x[2]) - x[1];
            out[2] = x[0] * x[1] - 8.0 / 3.0 * x[2];
        };
        let zero = |_: &[f64], _: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let x0 = [1.0, 1.0, 1.0];
        let dt = 1e-3;

        let mut x = x0.to_vec();
        let mut f = [0.0; 3];
        let mut reference = x.clone();
        for _ in 0..2000 {
            drift(&x, &mut f);
            for i in 0..3 {
                x[i] = x[i] + dt * f[i];
            }
            reference.extend_from_slice(&x);
        }

        for deterministic in [true, false] {
            let model = FnSde {
                dim: 3,
                drift,
                diffusion: zero,
                deterministic,
            };
            let traj = integrate_em(&model, &x0, StepConfig::new(dt, 2000), RngStream::new(5, 5)).unwrap();
            assert_eq!(traj.as_slice(), reference.as_slice());
        }
    }

    #[test]
    fn reproducible_per_stream() {
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 2f64.sqrt() };
        let s = StepConfig::new(1e-2, 1000);
        let a = integrate_em(&ou, &[0.0], s, RngStream::new(3, 9)).unwrap();
        let b = integrate_em(&ou, &[0.0], s, RngStream::new(3, 9)).unwrap();
        let c = integrate_em(&ou, &[0.0], s, RngStream::new(3, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stride_keeps_matching_rows() {
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 1.0 };
        let full = integrate_em(&ou, &[0.5], StepConfig::new(1e-2, 100), RngStream::new(1, 1)).unwrap();
        let thin = integrate_em(&ou, &[0.5], StepConfig::new(1e-2, 100).with_stride(10), RngStream::new(1, 1)).unwrap();
        assert_eq!(thin.len(), 11);
        assert!((thin.dt() - 0.1).abs() < 1e-15);
        for k in 0..11 {
            assert_eq!(thin.row(k), full.row(10 * k));
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let model = FnSde {
            dim: 1,
            drift: |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0],
            diffusion: |_: &[f64], _: &[f64], out: &mut [f64]| out[0] = 0.0,
            deterministic: true,
        };
        let err = integrate_em(&model, &[1.0], StepConfig::new(0.5, 100), RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, SdeError::NonFiniteState { step } if step > 1));
    }

    #[test]
    fn ou_stationary_variance() {
        // dx = -x dt + sqrt(2) dW has stationary variance 2 / (2 * 1) = 1.
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 2f64.sqrt() };
        let traj = integrate_em(&ou, &[0.0], StepConfig::new(1e-3, 10_000_000).with_stride(10), RngStream::new(42, 0)).unwrap();
        let xs = traj.column(0);
        let var = sample_variance(&xs[10_000..]);
        assert!((0.98..=1.02).contains(&var), "variance {var}");
    }

    #[test]
    fn halving_dt_stays_within_monte_carlo_band() {
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 2f64.sqrt() };
        let t_total = 20_000.0;
        let var_at = |dt: f64| {
            let n = (t_total / dt) as usize;
            let stride = (0.01 / dt).round() as usize;
            let traj = integrate_em(&ou, &[0.0], StepConfig::new(dt, n).with_stride(stride), RngStream::new(8, 1)).unwrap();
            sample_variance(&traj.column(0)[1000..])
        };
        let coarse = var_at(2e-3);
        let fine = var_at(1e-3);
        // Var of the variance estimate is roughly 2 * tau_int / T with tau_int = 1.
        let band = 3.0 * (2.0 * 2.0 / t_total as f64).sqrt();
        assert!((coarse - fine).abs() < band, "{coarse} vs {fine}");
    }
}
