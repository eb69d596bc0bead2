use crate::funcparam::GaussianBasisFunction;
use crate::sde::Langevin2Model;

/// Underdamped Langevin equation for a dihedral angle with constant damping
/// `γ`, temperature-like noise scale `σ` and a periodic Gaussian-basis potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DihedralLangevin {
    pub gamma: f64,
    pub sigma: f64,
    pub potential: GaussianBasisFunction,
}

impl Langevin2Model for DihedralLangevin {
    fn damping(&self, _phi: f64) -> f64 {
        self.gamma
    }

    fn potential_grad(&self, phi: f64) -> f64 {
        self.potential.derivative(phi)
    }

    fn noise_scale(&self) -> f64 {
        self.sigma
    }

    fn periodic(&self) -> bool {
        self.potential.periodic
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcparam::periodic_centers;
    use crate::rng::RngStream;
    use crate::sde::{integrate_langevin2, StepConfig};

    #[test]
    fn flat_potential_equipartition() {
        let m = DihedralLangevin {
            gamma: 1.0,
            sigma: 1.0,
            potential: GaussianBasisFunction::new(periodic_centers(9), 0.5, vec![0.0; 9], true),
        };
        let t = integrate_langevin2(&m, 0.0, 0.0, StepConfig::new(1e-2, 4_000_000).with_stride(10), RngStream::new(5, 0)).unwrap();
        let v = t.column(1);
        let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn rest_at_minimum_without_noise() {
        // A single positive bump centred at 0 makes ±π the minimum.
        let potential = GaussianBasisFunction::new(vec![0.0], 0.5, vec![1.0], true);
        let m = DihedralLangevin { gamma: 2.0, sigma: 0.0, potential: potential.clone() };
        let phi0 = -std::f64::consts::PI;
        assert!(potential.derivative(phi0).abs() < 1e-12, "{}", potential.derivative(phi0));
        let t = integrate_langevin2(&m, phi0, 0.0, StepConfig::new(1e-3, 1000), RngStream::new(0, 0)).unwrap();
        assert!(t.rows().all(|r| (r[0] - phi0).abs() < 1e-12 && r[1].abs() < 1e-12));
    }
}
