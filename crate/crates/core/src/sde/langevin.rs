use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::RngStream;

use super::{Langevin2Model, SdeError, StepConfig, Trajectory};

/// Map an angle to `[-π, π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = phi - two_pi * ((phi + PI) / two_pi).floor();
    // Round-off can land exactly on +π.
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

/// Semi-implicit Euler–Maruyama for `φ'' + γ φ' + Ψ'(φ) = sqrt(2 σ γ) dW/dt`:
/// the velocity takes an Euler–Maruyama step, then the angle advances with
/// the new velocity. Output columns are `(φ, v)`; φ is wrapped for periodic
/// models, while the integration itself runs on the unwrapped angle.
pub fn integrate_langevin2<M: Langevin2Model + ?Sized>(
    model: &M,
    phi0: f64,
    v0: f64,
    steps: StepConfig,
    stream: RngStream,
) -> Result<Trajectory, SdeError> {
    steps.validate()?;
    if !(phi0.is_finite() && v0.is_finite()) {
        return Err(SdeError::NonFiniteState { step: 0 });
    }
    let sigma = model.noise_scale();
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SdeError::InvalidSettings(format!("noise scale {sigma} must be non-negative")));
    }
    let periodic = model.periodic();
    let emit = |phi: f64| if periodic { wrap_angle(phi) } else { phi };
    let dt = steps.dt;
    let sqdt = dt.sqrt();
    let mut rng = stream.generator();

    let mut out = Vec::with_capacity(steps.output_rows() * 2);
    out.push(emit(phi0));
    out.push(v0);
    let (mut phi, mut v) = (phi0, v0);

    for step in 1..=steps.n_steps {
        let gamma = model.damping(phi);
        if !(gamma > 0.0) {
            return Err(SdeError::NonPositiveDamping { phi });
        }
        let force = -gamma * v - model.potential_grad(phi);
        v += force * dt;
        if sigma > 0.0 {
            let xi: f64 = rng.sample(StandardNormal);
            v += (2.0 * sigma * gamma).sqrt() * sqdt * xi;
        }
        phi += v * dt;
        if !(phi.is_finite() && v.is_finite()) {
            return Err(SdeError::NonFiniteState { step });
        }
        if step % steps.stride == 0 {
            out.push(emit(phi));
            out.push(v);
        }
    }
    Ok(Trajectory::from_parts_unchecked(
        dt * steps.stride as f64,
        0.0,
        2,
        out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        gamma: f64,
        stiffness: f64,
        sigma: f64,
    }

    impl Langevin2Model for Quadratic {
        fn damping(&self, _phi: f64) -> f64 {
            self.gamma
        }
        fn potential_grad(&self, phi: f64) -> f64 {
            self.stiffness * phi
        }
        fn noise_scale(&self) -> f64 {
            self.sigma
        }
    }

    #[test]
    fn free_particle_coasts_to_one() {
        let m = Quadratic { gamma: 1.0, stiffness: 0.0, sigma: 0.0 };
        let traj = integrate_langevin2(&m, 0.0, 1.0, StepConfig::new(1e-3, 10_000), RngStream::new(0, 0)).unwrap();
        let phi10 = traj.last()[0];
        assert!((phi10 - 1.0).abs() < 0.01, "phi(10) = {phi10}");
    }

    #[test]
    fn gibbs_variance_in_quadratic_well() {
        // Stationary density ∝ exp(-Ψ/σ) with Ψ = φ²/2 gives Var φ = σ.
        let m = Quadratic { gamma: 1.0, stiffness: 1.0, sigma: 1.0 };
        let traj = integrate_langevin2(&m, 0.0, 0.0, StepConfig::new(5e-3, 20_000_000).with_stride(20), RngStream::new(17, 0)).unwrap();
        let phis: Vec<f64> = traj.column(0)[10_000..].to_vec();
        let mean = phis.iter().sum::<f64>() / phis.len() as f64;
        let var = phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / phis.len() as f64;
        assert!((0.95..=1.05).contains(&var), "variance {var}");
    }

    #[test]
    fn resting_at_stationary_point_stays_put() {
        let m = Quadratic { gamma: 2.0, stiffness: 3.0, sigma: 0.0 };
        let traj = integrate_langevin2(&m, 0.0, 0.0, StepConfig::new(1e-2, 500), RngStream::new(0, 0)).unwrap();
        assert!(traj.rows().all(|r| r == [0.0, 0.0]));
    }

    #[test]
    fn non_positive_damping_is_an_error() {
        let m = Quadratic { gamma: -1.0, stiffness: 1.0, sigma: 1.0 };
        let err = integrate_langevin2(&m, 0.3, 0.0, StepConfig::new(1e-2, 10), RngStream::new(0, 0)).unwrap_err();
        assert_eq!(err, SdeError::NonPositiveDamping { phi: 0.3 });
    }

    #[test]
    fn wrapping_lands_in_half_open_interval() {
        for phi in [-PI, PI, 3.0 * PI, -3.0 * PI, 0.1, 7.5, -7.5, 100.0] {
            let w = wrap_angle(phi);
            assert!((-PI..PI).contains(&w), "{phi} -> {w}");
            assert!(((phi - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((phi - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
        assert_eq!(wrap_angle(PI), -PI);
    }
}
