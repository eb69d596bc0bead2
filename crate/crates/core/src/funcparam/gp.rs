use nalgebra::{DMatrix, DVector};

use super::FuncParamError;

/// Squared-exponential kernel `σ² exp(-‖x - x'‖² / (2ℓ²))`.
pub fn rbf_kernel(x: &[f64], xp: &[f64], amplitude: f64, length_scale: f64) -> f64 {
    debug_assert_eq!(x.len(), xp.len());
    let d2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
    amplitude * amplitude * (-d2 / (2.0 * length_scale * length_scale)).exp()
}

/// `n` equispaced points from `lo` to `hi` inclusive.
pub fn equispaced_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Posterior mean of a zero-mean GP regression on noisy node values.
///
/// The mean is `m(x) = Σ_i α_i k(x, x_i)` with `α = (K + λ² I)^{-1} θ'`,
/// where `θ'` are the node values and `λ` the observation-error scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GpMeanFunction {
    pub nodes: Vec<Vec<f64>>,
    pub node_values: Vec<f64>,
    pub obs_error: f64,
    pub amplitude: f64,
    pub length_scale: f64,
}

impl GpMeanFunction {
    pub fn new(
        nodes: Vec<Vec<f64>>,
        node_values: Vec<f64>,
        obs_error: f64,
        amplitude: f64,
        length_scale: f64,
    ) -> Result<Self, FuncParamError> {
        if nodes.len() != node_values.len() {
            return Err(FuncParamError::InvalidHyperparameter(format!(
                "{} nodes but {} node values",
                nodes.len(),
                node_values.len()
            )));
        }
        if let Some(first) = nodes.first() {
            if nodes.iter().any(|n| n.len() != first.len()) {
                return Err(FuncParamError::InvalidHyperparameter("nodes differ in dimension".into()));
            }
        }
        for (name, v) in [("obs_error", obs_error), ("amplitude", amplitude), ("length_scale", length_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FuncParamError::InvalidHyperparameter(format!("{name} = {v}")));
            }
        }
        if node_values.iter().chain(nodes.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(FuncParamError::InvalidHyperparameter("non-finite node data".into()));
        }
        Ok(Self {
            nodes,
            node_values,
            obs_error,
            amplitude,
            length_scale,
        })
    }

    /// A GP on the real line with scalar nodes.
    pub fn scalar(
        nodes: &[f64],
        node_values: Vec<f64>,
        obs_error: f64,
        amplitude: f64,
        length_scale: f64,
    ) -> Result<Self, FuncParamError> {
        Self::new(
            nodes.iter().map(|&x| vec![x]).collect(),
            node_values,
            obs_error,
            amplitude,
            length_scale,
        )
    }

    fn gram(&self) -> DMatrix<f64> {
        let n = self.nodes.len();
        DMatrix::from_fn(n, n, |i, j| {
            rbf_kernel(&self.nodes[i], &self.nodes[j], self.amplitude, self.length_scale)
        })
    }

    /// Solve for the representer coefficients and bundle them with the function.
    pub fn fit(self) -> Result<FittedGp, FuncParamError> {
        let alpha = fit_representer(&self)?;
        Ok(FittedGp { gp: self, alpha })
    }
}

/// Representer coefficients `α = (K + λ² I)^{-1} θ'` by Cholesky.
///
/// If the factorization fails, `1e-10 σ² I` is added to `K` and the solve
/// retried once.
pub fn fit_representer(f: &GpMeanFunction) -> Result<Vec<f64>, FuncParamError> {
    let n = f.nodes.len();
    let mut a = f.gram();
    let lambda2 = f.obs_error * f.obs_error;
    for i in 0..n {
        a[(i, i)] += lambda2;
    }
    let rhs = DVector::from_column_slice(&f.node_values);
    let chol = match a.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * f.amplitude * f.amplitude;
            for i in 0..n {
                a[(i, i)] += jitter;
            }
            a.cholesky().ok_or(FuncParamError::SingularGram)?
        }
    };
    let alpha = chol.solve(&rhs);
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(FuncParamError::SingularGram);
    }
    Ok(alpha.iter().copied().collect())
}

/// `Σ_i α_i k(x, x_i)`.
pub fn evaluate_mean(f: &GpMeanFunction, alpha: &[f64], x: &[f64]) -> f64 {
    f.nodes
        .iter()
        .zip(alpha)
        .map(|(node, a)| a * rbf_kernel(x, node, f.amplitude, f.length_scale))
        .sum()
}

/// A GP mean function with its representer coefficients solved.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedGp {
    pub gp: GpMeanFunction,
    pub alpha: Vec<f64>,
}

impl FittedGp {
    pub fn eval(&self, x: &[f64]) -> f64 {
        evaluate_mean(&self.gp, &self.alpha, x)
    }
}
