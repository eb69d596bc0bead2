use std::f64::consts::PI;

use crate::sde::wrap_angle;

/// `n` centers evenly spaced around the circle `[-π, π)`.
pub fn periodic_centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect()
}

/// `Σ_i w_i exp(-(φ - c_i)² / (2 width²))`, optionally made 2π-periodic by
/// summing the images at `φ` wrapped into `[-π, π)` and at `φ ± 2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBasisFunction {
    pub centers: Vec<f64>,
    pub width: f64,
    pub weights: Vec<f64>,
    pub periodic: bool,
}

impl GaussianBasisFunction {
    pub fn new(centers: Vec<f64>, width: f64, weights: Vec<f64>, periodic: bool) -> Self {
        assert!(width > 0.0, "basis width must be positive");
        assert_eq!(centers.len(), weights.len(), "one weight per center");
        Self {
            centers,
            width,
            weights,
            periodic,
        }
    }

    fn images(&self, phi: f64) -> impl Iterator<Item = f64> {
        let (base, count) = if self.periodic { (wrap_angle(phi), 3) } else { (phi, 1) };
        [base, base - 2.0 * PI, base + 2.0 * PI].into_iter().take(count)
    }

    pub fn value(&self, phi: f64) -> f64 {
        let s2 = 2.0 * self.width * self.width;
        self.images(phi)
            .map(|p| {
                self.centers
                    .iter()
                    .zip(&self.weights)
                    .map(|(c, w)| w * (-(p - c) * (p - c) / s2).exp())
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        let w2 = self.width * self.width;
        self.images(phi)
            .map(|p| {
                self.centers
                    .iter()
                    .zip(&self.weights)
                    .map(|(c, w)| -w * (p - c) / w2 * (-(p - c) * (p - c) / (2.0 * w2)).exp())
                    .sum::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_weights_vanish() {
        let b = GaussianBasisFunction::new(periodic_centers(9), 0.5, vec![0.0; 9], true);
        for phi in [-3.0, -1.0, 0.0, 2.5, 7.0] {
            assert_eq!(b.value(phi), 0.0);
            assert_eq!(b.derivative(phi), 0.0);
        }
    }

    #[test]
    fn nine_centers_on_the_circle() {
        let c = periodic_centers(9);
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], -PI);
        assert!((c[1] - c[0] - 2.0 * PI / 9.0).abs() < 1e-15);
        assert!(c[8] < PI);
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(weights in proptest::collection::vec(-2.0f64..2.0, 9), phi in -3.1f64..3.1) {
            let b = GaussianBasisFunction::new(periodic_centers(9), 0.5, weights, true);
            let h = 1e-5;
            let fd = (b.value(phi + h) - b.value(phi - h)) / (2.0 * h);
            prop_assert!((fd - b.derivative(phi)).abs() < 1e-6);
        }

        #[test]
        fn periodic_across_the_seam(weights in proptest::collection::vec(-2.0f64..2.0, 9)) {
            let b = GaussianBasisFunction::new(periodic_centers(9), 0.5, weights, true);
            prop_assert!((b.value(-PI) - b.value(PI)).abs() < 1e-10);
            prop_assert!((b.derivative(-PI) - b.derivative(PI)).abs() < 1e-10);
        }
    }
}
