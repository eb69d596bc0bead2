use std::sync::Arc;

use crate::funcparam::ScalarFunction;
use crate::sde::SdeModel;

/// Two-scale Lorenz 96 system with `K` slow variables `x_k` and `K·J` fast
/// variables `y_{j,k}`.
///
/// State layout: the `K` slow variables, then the fast variables in one flat
/// cyclic array where `y_{j,k}` sits at `k·J + j`, so `y_{J,k}` is followed by
/// `y_{1,k+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorenz96Multiscale {
    pub k: usize,
    pub j: usize,
    pub h: f64,
    pub forcing: f64,
    pub c: f64,
    pub b: f64,
}

impl Default for Lorenz96Multiscale {
    fn default() -> Self {
        Self {
            k: 36,
            j: 10,
            h: 1.0,
            forcing: 10.0,
            c: 10.0,
            b: 10.0,
        }
    }
}

impl SdeModel for Lorenz96Multiscale {
    fn dim(&self) -> usize {
        self.k * (1 + self.j)
    }

    fn drift(&self, state: &[f64], out: &mut [f64]) {
        let (k, j) = (self.k, self.j);
        let (x, y) = state.split_at(k);
        let (dx, dy) = out.split_at_mut(k);
        let n = k * j;
        let coupling = self.h * self.c / j as f64;
        for i in 0..k {
            let ysum: f64 = y[i * j..(i + 1) * j].iter().sum();
            dx[i] = -x[(i + k - 1) % k] * (x[(i + k - 2) % k] - x[(i + 1) % k]) - x[i] + self.forcing
                - coupling * ysum;
        }
        let forcing_fast = self.h / j as f64;
        for m in 0..n {
            let yp1 = y[(m + 1) % n];
            let yp2 = y[(m + 2) % n];
            let ym1 = y[(m + n - 1) % n];
            dy[m] = self.c * (-self.b * yp1 * (yp2 - ym1) - y[m] + forcing_fast * x[m / j]);
        }
    }

    fn diffuse(&self, _x: &[f64], _xi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Closed model for the slow Lorenz 96 variables:
/// `dX_k = (-X_{k-1}(X_{k-2} - X_{k+1}) - X_k + F - (h²c/J) X_k + ψ(X_k)) dt + sqrt(σ) dW_k`.
#[derive(Clone)]
pub struct Lorenz96Closure {
    pub k: usize,
    pub j: usize,
    pub h: f64,
    pub forcing: f64,
    pub c: f64,
    pub closure: Option<Arc<dyn ScalarFunction>>,
    pub sigma: f64,
}

impl Lorenz96Closure {
    /// Homogeneous equilibrium `F / (1 + h²c/J)` of the model without closure.
    pub fn balance_fixed_point(&self) -> f64 {
        self.forcing / (1.0 + self.h * self.h * self.c / self.j as f64)
    }
}

impl SdeModel for Lorenz96Closure {
    fn dim(&self) -> usize {
        self.k
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let k = self.k;
        let damping = 1.0 + self.h * self.h * self.c / self.j as f64;
        for i in 0..k {
            let psi = self.closure.as_ref().map_or(0.0, |f| f.value(x[i]));
            out[i] = -x[(i + k - 1) % k] * (x[(i + k - 2) % k] - x[(i + 1) % k]) - damping * x[i] + self.forcing + psi;
        }
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
