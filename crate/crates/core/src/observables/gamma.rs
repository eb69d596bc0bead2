use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::sde::Trajectory;

use super::{ObservableError, StatisticsSpec};

/// Batch-means estimate of the covariance of the full-window statistics.
///
/// The post-burn-in window is cut into `n_batches` disjoint blocks of equal
/// length; the statistic vector of each block is assembled, and their
/// sample covariance is multiplied by `block length / window length` so that
/// it estimates the sampling covariance of the average over the whole window.
pub fn estimate_gamma(
    traj: &Trajectory,
    spec: &StatisticsSpec,
    n_batches: usize,
) -> Result<DMatrix<f64>, ObservableError> {
    if n_batches < 2 {
        return Err(ObservableError::InvalidSpec("batch means needs at least two batches".into()));
    }
    spec.validate(traj.dim())?;
    let window = spec.window(traj)?;
    let block = window.len() / n_batches;
    if block < 2 {
        return Err(ObservableError::WindowTooShort(format!(
            "{} samples cannot be split into {n_batches} batches",
            window.len()
        )));
    }
    let stats: Vec<Vec<f64>> = (0..n_batches)
        .into_par_iter()
        .map(|b| spec.evaluate_window(&window.slice_rows(b * block, (b + 1) * block)))
        .collect::<Result<_, _>>()?;

    let j = spec.len();
    let n = n_batches as f64;
    let mut mean = vec![0.0; j];
    for s in &stats {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    let centered = DMatrix::from_fn(j, n_batches, |r, c| stats[c][r] - mean[r]);
    let scale = (block as f64 / window.len() as f64) / (n - 1.0);
    let mut gamma = &centered * centered.transpose() * scale;
    // exact symmetry regardless of floating-point summation order
    for r in 0..j {
        for c in 0..r {
            let v = 0.5 * (gamma[(r, c)] + gamma[(c, r)]);
            gamma[(r, c)] = v;
            gamma[(c, r)] = v;
        }
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{all_moment_terms, AcfRequest};
    use crate::rng::RngStream;
    use crate::sde::{integrate_em, OrnsteinUhlenbeck, StepConfig};
    use proptest::prelude::*;

    #[test]
    fn constant_trajectory_has_zero_covariance() {
        let t = Trajectory::new(0.1, 0.0, 2, vec![1.5; 2000]).unwrap();
        let spec = StatisticsSpec {
            moments: all_moment_terms(&[0, 1], 2),
            burn_in: Some(0.0),
            ..Default::default()
        };
        let g = estimate_gamma(&t, &spec, 10).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-28), "{g}");
    }

    #[test]
    fn ou_mean_variance_matches_integrated_autocovariance() {
        // dX = -X dt + sqrt(2) dW has unit variance and autocovariance e^{-|t|},
        // so the time average over T has variance 2 / T.
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 2f64.sqrt() };
        let steps = StepConfig::covering(1e-3, 1e4, 10);
        let traj = integrate_em(&ou, &[0.0], steps, RngStream::new(8, 1)).unwrap();
        let spec = StatisticsSpec {
            moments: vec![vec![0]],
            burn_in: Some(0.0),
            ..Default::default()
        };
        let g = estimate_gamma(&traj, &spec, 20).unwrap();
        let analytic = 2.0 / 1e4;
        assert!(g[(0, 0)] > analytic / 2.0 && g[(0, 0)] < analytic * 2.0, "{}", g[(0, 0)]);
    }

    #[test]
    fn rejects_single_batch_and_tiny_blocks() {
        let t = Trajectory::from_series(1.0, 0.0, vec![0.0; 10]).unwrap();
        let spec = StatisticsSpec {
            moments: vec![vec![0]],
            burn_in: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(estimate_gamma(&t, &spec, 1), Err(ObservableError::InvalidSpec(_))));
        assert!(matches!(estimate_gamma(&t, &spec, 8), Err(ObservableError::WindowTooShort(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn symmetric_positive_semidefinite(data in proptest::collection::vec(-5.0f64..5.0, 400..800), batches in 2usize..12) {
            let n = data.len() / 2;
            let t = Trajectory::new(0.1, 0.0, 2, data[..2 * n].to_vec()).unwrap();
            let spec = StatisticsSpec {
                moments: all_moment_terms(&[0, 1], 2),
                acf: vec![AcfRequest { component: 1, lags: vec![0.1, 0.3] }],
                burn_in: Some(0.0),
                ..Default::default()
            };
            let g = estimate_gamma(&t, &spec, batches).unwrap();
            prop_assert_eq!(g.clone(), g.transpose());
            let eig = g.symmetric_eigen().eigenvalues;
            let tol = 1e-10 * eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(eig.iter().all(|&e| e > -tol));
        }
    }
}
