use crate::sde::Trajectory;

use super::{ObservableError, StatisticsSpec};

/// Time averages of `∏_{j∈M} x_j` over the post-burn-in window, one per term in `spec.moments`.
pub fn compute_moments(traj: &Trajectory, spec: &StatisticsSpec) -> Result<Vec<f64>, ObservableError> {
    spec.validate(traj.dim())?;
    let window = spec.window(traj)?;
    Ok(moments_of(&window, &spec.moments))
}

pub(crate) fn moments_of(window: &Trajectory, terms: &[Vec<usize>]) -> Vec<f64> {
    let mut sums = vec![0.0; terms.len()];
    for row in window.rows() {
        for (s, term) in sums.iter_mut().zip(terms) {
            *s += term.iter().map(|&c| row[c]).product::<f64>();
        }
    }
    let n = window.len() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sde::{integrate_em, OrnsteinUhlenbeck, StepConfig};

    #[test]
    fn constant_trajectory_is_exact() {
        let traj = Trajectory::new(0.1, 0.0, 2, [2.0, 3.0].repeat(50)).unwrap();
        let spec = StatisticsSpec {
            moments: vec![vec![0], vec![1], vec![0, 1]],
            burn_in: Some(1.0),
            ..Default::default()
        };
        assert_eq!(compute_moments(&traj, &spec).unwrap(), vec![2.0, 3.0, 6.0]);
    }

    #[test]
    fn ou_first_two_moments() {
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 2f64.sqrt() };
        let traj = integrate_em(&ou, &[0.0], StepConfig::covering(1e-3, 10_010.0, 10), RngStream::new(99, 0)).unwrap();
        let spec = StatisticsSpec {
            moments: vec![vec![0], vec![0, 0]],
            burn_in: Some(10.0),
            averaging_window: Some(10_000.0),
            ..Default::default()
        };
        let m = compute_moments(&traj, &spec).unwrap();
        assert!(m[0].abs() < 0.05, "{m:?}");
        assert!((m[1] - 1.0).abs() < 0.05, "{m:?}");
    }

    #[test]
    fn spread_shrinks_like_inverse_root_window() {
        let ou = OrnsteinUhlenbeck { rate: 1.0, amplitude: 2f64.sqrt() };
        let spread = |window: f64| {
            let means: Vec<f64> = (0..400)
                .map(|seed| {
                    let traj = integrate_em(&ou, &[0.0], StepConfig::covering(0.01, window + 5.0, 1), RngStream::new(seed, 7)).unwrap();
                    let spec = StatisticsSpec {
                        moments: vec![vec![0]],
                        burn_in: Some(5.0),
                        averaging_window: Some(window),
                        ..Default::default()
                    };
                    compute_moments(&traj, &spec).unwrap()[0]
                })
                .collect();
            let m = means.iter().sum::<f64>() / means.len() as f64;
            (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
        };
        let ratio = spread(50.0) / spread(100.0);
        assert!((1.2..=1.7).contains(&ratio), "ratio {ratio}");
    }
}
