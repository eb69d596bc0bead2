use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;
use rand::Rng;

use crate::observables::DataVector;
use crate::rng::RngStream;

use super::{EkiError, Ensemble};

/// Relative jitter added to the diagonal of `C^GG + Γ`, scaled by its mean diagonal.
pub const SYSTEM_JITTER: f64 = 1e-8;

/// Empirical cross-covariance `C^θG` (`p × J`) and covariance `C^GG`
/// (`J × J`), both normalized by the ensemble size.
pub fn ensemble_covariances(particles: &DMatrix<f64>, g_vals: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = particles.nrows() as f64;
    let center = |m: &DMatrix<f64>| {
        let mean = m.row_mean();
        let mut c = m.clone();
        for mut row in c.row_iter_mut() {
            row -= &mean;
        }
        c
    };
    let dt = center(particles);
    let dg = center(g_vals);
    let c_tg = dt.transpose() * &dg / n;
    let c_gg = dg.transpose() * &dg / n;
    (c_tg, c_gg)
}

/// One ensemble Kalman inversion update.
///
/// Member `j` moves by `C^θG (C^GG + Γ + εI)^{-1} (y_j - G_j)`, where
/// `ε = 1e-8 · mean diag(C^GG + Γ)` and `y_j` is `y` itself or, when
/// `perturb` is set, `y` plus an independent `N(0, Γ)` draw from `stream`.
pub fn eki_step(
    ens: &Ensemble,
    g_vals: &DMatrix<f64>,
    y: &DataVector,
    perturb: bool,
    stream: RngStream,
) -> Result<Ensemble, EkiError> {
    let (n, j) = (ens.size(), y.len());
    if g_vals.nrows() != n || g_vals.ncols() != j {
        return Err(EkiError::DimensionMismatch(format!(
            "forward values are {}×{}, expected {n}×{j}",
            g_vals.nrows(),
            g_vals.ncols()
        )));
    }
    let (c_tg, c_gg) = ensemble_covariances(&ens.particles, g_vals);
    let mut system = c_gg + &y.gamma;
    let jitter = SYSTEM_JITTER * system.trace() / j.max(1) as f64;
    for i in 0..j {
        system[(i, i)] += jitter;
    }
    let chol = system.cholesky().ok_or(EkiError::SingularSystem)?;

    let mut targets = DMatrix::from_fn(j, n, |r, _| y.values[r]);
    if perturb {
        let noise_factor = y
            .regularized_gamma()
            .cholesky()
            .ok_or(EkiError::SingularSystem)?
            .l();
        let mut rng = stream.generator();
        for m in 0..n {
            let z = DVector::from_fn(j, |_, _| rng.sample::<f64, _>(StandardNormal));
            let draw = &noise_factor * z;
            for r in 0..j {
                targets[(r, m)] += draw[r];
            }
        }
    }
    let residuals = targets - g_vals.transpose();
    let moved = c_tg * chol.solve(&residuals);
    let mut particles = ens.particles.clone();
    particles += moved.transpose();
    if particles.iter().any(|v| !v.is_finite()) {
        return Err(EkiError::SingularSystem);
    }
    Ok(Ensemble {
        particles,
        generation: ens.generation + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn data(values: Vec<f64>, gamma: DMatrix<f64>) -> DataVector {
        let labels = (0..values.len()).map(|i| format!("y{i}")).collect();
        DataVector::without_gamma(values, labels).with_gamma(gamma)
    }

    /// Gaussian elimination with partial pivoting on a dense copy.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn identical_outputs_leave_ensemble_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ens = Ensemble::new(random_matrix(&mut rng, 6, 3)).unwrap();
        let g = DMatrix::from_fn(6, 2, |_, c| c as f64 + 0.5);
        let y = data(vec![3.0, -1.0], DMatrix::identity(2, 2));
        let next = eki_step(&ens, &g, &y, true, RngStream::new(0, 0)).unwrap();
        assert_eq!(next.particles, ens.particles);
        assert_eq!(next.generation, 1);
    }

    #[test]
    fn linear_map_mean_matches_kalman_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, p, j) = (8, 3, 5);
        let a = random_matrix(&mut rng, j, p);
        let ens = Ensemble::new(random_matrix(&mut rng, n, p) * 3.0).unwrap();
        let g = &ens.particles * a.transpose();
        let gamma_root = random_matrix(&mut rng, j, j);
        let gamma = &gamma_root * gamma_root.transpose() * 0.1 + DMatrix::identity(j, j) * 0.05;
        let y = data((0..j).map(|_| rng.random_range(-2.0..2.0)).collect(), gamma.clone());
        let next = eki_step(&ens, &g, &y, false, RngStream::new(0, 0)).unwrap();

        // Oracle: explicit sums for the covariances and an independent dense solve.
        let tbar: Vec<f64> = (0..p).map(|k| (0..n).map(|m| ens.particles[(m, k)]).sum::<f64>() / n as f64).collect();
        let gbar: Vec<f64> = (0..j).map(|k| (0..n).map(|m| g[(m, k)]).sum::<f64>() / n as f64).collect();
        let mut sys = vec![vec![0.0; j]; j];
        for r in 0..j {
            for c in 0..j {
                let cov: f64 = (0..n).map(|m| (g[(m, r)] - gbar[r]) * (g[(m, c)] - gbar[c])).sum::<f64>() / n as f64;
                sys[r][c] = cov + gamma[(r, c)];
            }
        }
        let jitter = SYSTEM_JITTER * (0..j).map(|i| sys[i][i]).sum::<f64>() / j as f64;
        for (i, row) in sys.iter_mut().enumerate() {
            row[i] += jitter;
        }
        let resid: Vec<f64> = (0..j).map(|r| y.values[r] - gbar[r]).collect();
        let w = dense_solve(&sys, &resid);
        let expected: Vec<f64> = (0..p)
            .map(|k| {
                let c_row: Vec<f64> = (0..j)
                    .map(|r| (0..n).map(|m| (ens.particles[(m, k)] - tbar[k]) * (g[(m, r)] - gbar[r])).sum::<f64>() / n as f64)
                    .collect();
                tbar[k] + c_row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        for (got, want) in next.mean().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn covariances_ignore_constant_output_shift() {
        // Dyadic entries keep every centred difference exact.
        let particles = DMatrix::from_row_slice(4, 2, &[0.5, 1.0, -1.0, 0.25, 2.0, -0.75, 0.125, 0.5]);
        let g = DMatrix::from_row_slice(4, 3, &[1.0, 0.5, -2.0, 0.25, 1.5, 1.0, -1.0, 0.0, 0.75, 2.0, -0.5, 0.125]);
        let shifted = DMatrix::from_fn(4, 3, |r, c| g[(r, c)] + [8.0, -4.0, 16.0][c]);
        let (a_tg, a_gg) = ensemble_covariances(&particles, &g);
        let (b_tg, b_gg) = ensemble_covariances(&particles, &shifted);
        assert_eq!(a_tg, b_tg);
        assert_eq!(a_gg, b_gg);
    }

    #[test]
    fn updates_stay_in_initial_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, p, j) = (4, 10, 6);
        let init = Ensemble::new(random_matrix(&mut rng, n, p)).unwrap();
        let y = data(vec![0.3; j], DMatrix::identity(j, j) * 0.5);
        let mut ens = init.clone();
        for gen in 0..5 {
            let g = DMatrix::from_fn(n, j, |m, k| (ens.particles[(m, k % p)] * (k as f64 + 1.0)).sin());
            ens = eki_step(&ens, &g, &y, true, RngStream::new(gen, 0)).unwrap();
        }
        let basis = init.particles.transpose();
        let svd = basis.clone().svd(true, true);
        for m in 0..n {
            let v = ens.particles.row(m).transpose();
            let coef = svd.solve(&v, 1e-12).unwrap();
            let resid = (&basis * coef - &v).norm() / v.norm();
            assert!(resid < 1e-8, "{resid}");
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let ens = Ensemble::new(DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let g = DMatrix::from_row_slice(2, 1, &[f64::NAN, 1.0]);
        let y = data(vec![0.0], DMatrix::zeros(1, 1));
        assert_eq!(eki_step(&ens, &g, &y, false, RngStream::new(0, 0)), Err(EkiError::SingularSystem));
    }
}
