use crate::sde::SddeModel;

/// Delayed oscillator
/// `dx = (a tanh x(t - τ₁) - b tanh x(t - τ₂) - c x) dt + sqrt(σ) dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedOscillator {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    delays: [f64; 2],
}

impl DelayedOscillator {
    pub fn new(a: f64, b: f64, c: f64, sigma: f64, tau1: f64, tau2: f64) -> Self {
        Self {
            a,
            b,
            c,
            sigma,
            delays: [tau1, tau2],
        }
    }
}

impl SddeModel for DelayedOscillator {
    fn dim(&self) -> usize {
        1
    }

    fn delays(&self) -> &[f64] {
        &self.delays
    }

    fn drift(&self, x: &[f64], delayed: &[f64], out: &mut [f64]) {
        out[0] = self.a * delayed[0].tanh() - self.b * delayed[1].tanh() - self.c * x[0];
    }

    fn diffuse(&self, _x: &[f64], xi: &[f64], out: &mut [f64]) {
        out[0] = self.sigma.sqrt() * xi[0];
    }

    fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sde::{integrate_sdde, StepConfig, Trajectory};

    #[test]
    fn without_feedback_is_ou() {
        // a = b = 0 leaves dx = -c x dt + sqrt(σ) dW with variance σ / (2c).
        let m = DelayedOscillator::new(0.0, 0.0, 0.5, 0.4, 1.0, 6.0);
        let history = Trajectory::from_series(0.01, -6.0, vec![0.0; 601]).unwrap();
        let t = integrate_sdde(&m, &history, StepConfig::new(0.01, 4_000_000).with_stride(10), RngStream::new(3, 0)).unwrap();
        let xs: Vec<f64> = t.column(0)[1000..].to_vec();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!((var - 0.4).abs() < 0.04, "{var}");
    }

    #[test]
    fn zero_history_without_noise_stays_at_zero() {
        let m = DelayedOscillator::new(1.2, 0.8, 0.3, 0.0, 1.0, 6.0);
        let history = Trajectory::from_series(0.1, -6.0, vec![0.0; 61]).unwrap();
        let t = integrate_sdde(&m, &history, StepConfig::new(0.1, 500), RngStream::new(0, 0)).unwrap();
        assert!(t.as_slice().iter().all(|&v| v == 0.0));
    }
}
