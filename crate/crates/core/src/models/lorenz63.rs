use std::sync::Arc;

use crate::funcparam::{softplus, ScalarFunction};
use crate::sde::SdeModel;

/// `dx = f(x) dt + sqrt(σ) dW` with the Lorenz 63 drift
/// `f = (α(x₂ - x₁), x₁(ρ - x₃) - g(x₂), x₁x₂ - βx₃)`; `g` defaults to the identity.
#[derive(Clone)]
pub struct Lorenz63 {
    pub alpha: f64,
    pub rho: f64,
    pub beta: f64,
    pub sigma: f64,
    pub damping: Option<Arc<dyn ScalarFunction>>,
}

impl Lorenz63 {
    pub fn new(alpha: f64, rho: f64, beta: f64, sigma: f64) -> Self {
        Self {
            alpha,
            rho,
            beta,
            sigma,
            damping: None,
        }
    }

    pub fn with_damping(mut self, g: Arc<dyn ScalarFunction>) -> Self {
        self.damping = Some(g);
        self
    }
}

impl SdeModel for Lorenz63 {
    fn dim(&self) -> usize {
        3
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let g = match &self.damping {
            Some(g) => g.value(x[1]),
            None => x[1],
        };
        out[0] = self.alpha * (x[1] - x[0]);
        out[1] = x[0] * (self.rho - x[2]) - g;
        out[2] = x[0] * x[1] - self.beta * x[2];
    }

    fn diffuse(&self, _x: &[f64], xi: &[f64], out: &mut [f64]) {
        let s = self.sigma.sqrt();
        for (o, z) in out.iter_mut().zip(xi) {
            *o = s * z;
        }
    }

    fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }
}

/// Lorenz 63 in principal-component coordinates `a`, with rounded coefficients.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lorenz63Pca;

impl SdeModel for Lorenz63Pca {
    fn dim(&self) -> usize {
        3
    }

    fn drift(&self, a: &[f64], out: &mut [f64]) {
        let (a1, a2, a3) = (a[0], a[1], a[2]);
        out[0] = 2.3 * a1 - 6.2 * a3 - 0.49 * a1 * a2 - 0.57 * a2 * a3;
        out[1] = -62.0 - 2.7 * a2 + 0.49 * a1 * a1 - 0.49 * a3 * a3 + 0.14 * a1 * a3;
        out[2] = -0.63 * a1 - 13.0 * a3 + 0.43 * a1 * a2 + 0.49 * a2 * a3;
    }

    fn diffuse(&self, _x: &[f64], _xi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Two-component stochastic reduction of [`Lorenz63Pca`]:
///
/// ```text
/// da₁ = (2.3a₁ - 0.49a₁a₂ + ψ₁(a₂)) dt + sqrt(softplus(s₁(a₂))) dW₁
/// da₂ = (-62 - 2.7a₂ + 0.49a₁² + ψ₂(a₁)) dt + sqrt(softplus(s₂(a₁))) dW₂
/// ```
#[derive(Clone)]
pub struct Lorenz63Reduced {
    pub psi1: Arc<dyn ScalarFunction>,
    pub psi2: Arc<dyn ScalarFunction>,
    pub s1: Arc<dyn ScalarFunction>,
    pub s2: Arc<dyn ScalarFunction>,
    /// Drop the noise entirely (used to inspect the deterministic skeleton).
    pub noiseless: bool,
}

impl SdeModel for Lorenz63Reduced {
    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, a: &[f64], out: &mut [f64]) {
        let (a1, a2) = (a[0], a[1]);
        out[0] = 2.3 * a1 - 0.49 * a1 * a2 + self.psi1.value(a2);
        out[1] = -62.0 - 2.7 * a2 + 0.49 * a1 * a1 + self.psi2.value(a1);
    }

    fn diffuse(&self, a: &[f64], xi: &[f64], out: &mut [f64]) {
        if self.noiseless {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        out[0] = softplus(self.s1.value(a[1])).sqrt() * xi[0];
        out[1] = softplus(self.s2.value(a[0])).sqrt() * xi[1];
    }

    fn is_deterministic(&self) -> bool {
        self.noiseless
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcparam::Affine;
    use crate::rng::RngStream;
    use crate::sde::{integrate_em, StepConfig};

    fn drift_of<M: SdeModel>(m: &M, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.dim()];
        m.drift(x, &mut out);
        out
    }

    #[test]
    fn classic_drift_at_unit_state() {
        let m = Lorenz63::new(10.0, 28.0, 8.0 / 3.0, 10.0);
        let d = drift_of(&m, &[1.0, 1.0, 1.0]);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 26.0);
        assert!((d[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn identity_damping_function_matches_default() {
        let plain = Lorenz63::new(10.0, 28.0, 8.0 / 3.0, 1.0);
        let explicit = plain.clone().with_damping(Arc::new(Affine { slope: 1.0, offset: 0.0 }));
        let x = [0.3, -2.0, 17.0];
        assert_eq!(drift_of(&plain, &x), drift_of(&explicit, &x));
    }

    #[test]
    fn zero_sigma_is_deterministic_lorenz() {
        let m = Lorenz63::new(10.0, 28.0, 8.0 / 3.0, 0.0);
        assert!(m.is_deterministic());
        let a = integrate_em(&m, &[1.0, 2.0, 3.0], StepConfig::new(1e-3, 500), RngStream::new(1, 0)).unwrap();
        let b = integrate_em(&m, &[1.0, 2.0, 3.0], StepConfig::new(1e-3, 500), RngStream::new(2, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pca_golden_drift_values() {
        // Hand substitution into the rounded polynomial drift.
        let cases: [([f64; 3], [f64; 3]); 5] = [
            ([0.0, 0.0, 0.0], [0.0, -62.0, 0.0]),
            ([1.0, 0.0, 0.0], [2.3, -61.51, -0.63]),
            ([0.0, 1.0, 0.0], [0.0, -64.7, 0.0]),
            ([0.0, 0.0, 1.0], [-6.2, -62.49, -13.0]),
            ([1.0, 2.0, -1.0], [8.5 - 0.98 + 1.14, -62.0 - 5.4 + 0.49 - 0.49 - 0.14, -0.63 + 13.0 + 0.86 - 0.98]),
        ];
        for (a, want) in cases {
            let got = drift_of(&Lorenz63Pca, &a);
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-12, "{a:?}: {got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn reduced_drift_with_zero_closures() {
        let zero: Arc<dyn ScalarFunction> = Arc::new(Affine { slope: 0.0, offset: 0.0 });
        let m = Lorenz63Reduced {
            psi1: zero.clone(),
            psi2: zero.clone(),
            s1: zero.clone(),
            s2: zero,
            noiseless: true,
        };
        let d = drift_of(&m, &[1.0, 0.0]);
        assert!((d[0] - 2.3).abs() < 1e-15);
        assert!((d[1] - (-62.0 + 0.49)).abs() < 1e-12);
    }
}
