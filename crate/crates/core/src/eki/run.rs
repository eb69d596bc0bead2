use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::observables::DataVector;
use crate::rng::{RngStream, StreamPurpose};

use super::{eki_step, EkiError, EkiHistory, Ensemble, ForwardModel, GenerationRecord, InverseProblem};

/// When to stop iterating before the generation limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StoppingRule {
    /// Run exactly `max_gens` updates.
    #[default]
    Fixed,
    /// Stop once the ensemble-mean misfit drops to `threshold`, by default
    /// half the data dimension (the expected misfit of noise alone).
    Discrepancy {
        #[serde(default)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkiSettings {
    pub max_gens: usize,
    pub perturb: bool,
    pub stop: StoppingRule,
    pub seed: u64,
    /// Number of worker threads for forward evaluations; `None` uses the global pool.
    pub eval_budget: Option<usize>,
}

impl Default for EkiSettings {
    fn default() -> Self {
        Self {
            max_gens: 30,
            perturb: true,
            stop: StoppingRule::Fixed,
            seed: 0,
            eval_budget: None,
        }
    }
}

impl EkiSettings {
    /// `max(10, 2p)` members for `p` parameters.
    pub fn default_ensemble_size(p: usize) -> usize {
        (2 * p).max(10)
    }
}

/// `½ (y - g)ᵀ Γ⁻¹ (y - g)` with the regularized `Γ`.
pub fn misfit_of(values: &[f64], data: &DataVector) -> Result<f64, EkiError> {
    if values.len() != data.len() {
        return Err(EkiError::DimensionMismatch(format!(
            "{} statistics against {} data",
            values.len(),
            data.len()
        )));
    }
    let chol = data.regularized_gamma().cholesky().ok_or(EkiError::SingularSystem)?;
    let r = DVector::from_iterator(values.len(), data.values.iter().zip(values).map(|(y, g)| y - g));
    let w = chol.solve(&r);
    Ok(0.5 * r.dot(&w))
}

/// Misfit of one forward evaluation at `theta`.
pub fn misfit<F: ForwardModel>(theta: &[f64], problem: &InverseProblem<F>, stream: RngStream) -> Result<f64, EkiError> {
    let g = problem
        .forward
        .evaluate(theta, stream)
        .map_err(|e| EkiError::ForwardFailed(e.0))?;
    misfit_of(&g, &problem.data)
}

fn checked_eval<F: ForwardModel>(forward: &F, theta: &[f64], stream: RngStream, dim: usize) -> Result<Vec<f64>, String> {
    let g = forward.evaluate(theta, stream).map_err(|e| e.0)?;
    if g.len() != dim {
        return Err(format!("returned {} statistics, expected {dim}", g.len()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err("non-finite statistic".into());
    }
    Ok(g)
}

/// Iterate ensemble Kalman inversion from `init`.
///
/// Each generation evaluates every member (member `j` of generation `n`
/// draws from its own stream) plus the ensemble mean, records the misfit at
/// the mean, and applies [`eki_step`] unless the run is finished. Failed
/// members take the output of the worst-fitting successful member. Results
/// do not depend on the thread count.
pub fn run_eki<F: ForwardModel>(
    problem: &InverseProblem<F>,
    init: Ensemble,
    settings: &EkiSettings,
) -> Result<EkiHistory, EkiError> {
    let pool = match settings.eval_budget {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| EkiError::InvalidEnsemble(e.to_string()))?,
        ),
        None => None,
    };
    let j_data = problem.data.len();
    let threshold = match settings.stop {
        StoppingRule::Fixed => None,
        StoppingRule::Discrepancy { threshold } => Some(threshold.unwrap_or(0.5 * j_data as f64)),
    };

    let mut ens = init;
    let mut records = Vec::new();
    let mut stopped_early = false;
    for gen in 0..=settings.max_gens {
        let n = ens.size();
        let mean = ens.mean();
        let evaluate = |k: usize| {
            let theta = if k < n { ens.member(k) } else { mean.clone() };
            let stream = RngStream::derived(settings.seed, StreamPurpose::Forward, gen as u32, k as u32);
            checked_eval(&problem.forward, &theta, stream, j_data)
        };
        let outputs: Vec<Result<Vec<f64>, String>> = match &pool {
            Some(p) => p.install(|| (0..=n).into_par_iter().map(evaluate).collect()),
            None => (0..=n).into_par_iter().map(evaluate).collect(),
        };
        let mut outputs = outputs;
        let mut worst: Option<(f64, usize)> = None;
        for (k, out) in outputs.iter_mut().enumerate() {
            if let Ok(g) = out {
                let m = misfit_of(g, &problem.data)?;
                if !m.is_finite() {
                    *out = Err("misfit overflowed".into());
                } else if k < n && worst.is_none_or(|(w, _)| m > w) {
                    worst = Some((m, k));
                }
            }
        }
        let (members, at_mean) = outputs.split_at(n);
        let Some((_, worst_k)) = worst else {
            let first_error = members.iter().find_map(|r| r.as_ref().err().cloned()).unwrap_or_default();
            return Err(EkiError::AllMembersFailed { generation: gen, first_error });
        };
        let replacement = members[worst_k].as_ref().unwrap().clone();
        let failed: Vec<usize> = (0..n).filter(|&k| members[k].is_err()).collect();
        let g_vals = DMatrix::from_fn(n, j_data, |r, c| match &members[r] {
            Ok(g) => g[c],
            Err(_) => replacement[c],
        });

        let misfit_mean = match &at_mean[0] {
            Ok(g) => misfit_of(g, &problem.data)?,
            Err(_) => {
                let avg: Vec<f64> = g_vals.row_mean().iter().copied().collect();
                misfit_of(&avg, &problem.data)?
            }
        };
        records.push(GenerationRecord {
            gen,
            misfit_mean,
            mean,
            failed,
            particles: Some(ens.particles.row_iter().map(|r| r.iter().copied().collect()).collect()),
            forward: Some(g_vals.row_iter().map(|r| r.iter().copied().collect()).collect()),
        });

        if threshold.is_some_and(|t| misfit_mean <= t) && gen < settings.max_gens {
            stopped_early = true;
            break;
        }
        if gen == settings.max_gens {
            break;
        }
        let stream = RngStream::derived(settings.seed, StreamPurpose::Perturbation, gen as u32, 0);
        ens = eki_step(&ens, &g_vals, &problem.data, settings.perturb, stream)?;
    }
    Ok(EkiHistory {
        records,
        final_ensemble: ens,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eki::{FnForward, ForwardError};
    use crate::funcparam::{ParameterLayout, Transform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(values: Vec<f64>, gamma: DMatrix<f64>) -> DataVector {
        let labels = (0..values.len()).map(|i| format!("y{i}")).collect();
        DataVector::without_gamma(values, labels).with_gamma(gamma)
    }

    fn layout(p: usize) -> ParameterLayout {
        ParameterLayout::new().vector("theta", p, Transform::Identity)
    }

    fn random_ensemble(seed: u64, n: usize, p: usize) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ensemble::new(DMatrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0))).unwrap()
    }

    #[test]
    fn misfit_examples() {
        let y = data(vec![1.0], DMatrix::identity(1, 1));
        assert!((misfit_of(&[0.0], &y).unwrap() - 0.5).abs() < 1e-7);
        assert!(misfit_of(&[1.0], &y).unwrap().abs() < 1e-15);
        let y4 = data(vec![1.0], DMatrix::identity(1, 1) * 4.0);
        let ratio = misfit_of(&[0.0], &y).unwrap() / misfit_of(&[0.0], &y4).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_map_contracts_toward_zero() {
        let forward = FnForward { dim: 3, f: |t: &[f64], _| Ok(t.to_vec()) };
        let problem = InverseProblem::new(forward, data(vec![0.0; 3], DMatrix::identity(3, 3)), layout(3)).unwrap();
        let init = random_ensemble(4, 10, 3);
        let settings = EkiSettings { max_gens: 20, perturb: false, ..Default::default() };
        let h = run_eki(&problem, init.clone(), &settings).unwrap();
        let norms: Vec<f64> = h.records.iter().map(|r| r.mean.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
        assert!(norms.last().unwrap() < &(0.1 * norms[0]));
        let m = h.misfits();
        assert!(m.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(h.records.len(), 21);
    }

    #[test]
    fn failed_member_is_replaced_and_run_continues() {
        let forward = FnForward {
            dim: 2,
            f: |t: &[f64], _| {
                if t[0] > 2.0 {
                    Err(ForwardError::new("blew up"))
                } else {
                    Ok(vec![t[0], t[1]])
                }
            },
        };
        let problem = InverseProblem::new(forward, data(vec![0.0, 0.0], DMatrix::identity(2, 2)), layout(2)).unwrap();
        let mut init = random_ensemble(6, 8, 2);
        init.particles[(0, 0)] = 2.5;
        let h = run_eki(&problem, init, &EkiSettings { max_gens: 3, ..Default::default() }).unwrap();
        assert_eq!(h.records[0].failed, vec![0]);
        assert!(h.misfits().iter().all(|m| m.is_finite()));
    }

    #[test]
    fn all_members_failing_is_an_error() {
        let forward = FnForward { dim: 1, f: |_: &[f64], _| Err(ForwardError::new("nope")) };
        let problem = InverseProblem::new(forward, data(vec![0.0], DMatrix::identity(1, 1)), layout(1)).unwrap();
        let err = run_eki(&problem, random_ensemble(0, 4, 1), &EkiSettings::default()).unwrap_err();
        assert!(matches!(err, EkiError::AllMembersFailed { generation: 0, .. }));
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let forward = FnForward {
            dim: 2,
            f: |t: &[f64], s: RngStream| {
                let mut rng = s.generator();
                Ok(vec![t[0] + 0.1 * rng.random::<f64>(), t[0] * t[1]])
            },
        };
        let problem = InverseProblem::new(forward, data(vec![1.0, 0.5], DMatrix::identity(2, 2) * 0.01), layout(2)).unwrap();
        let run = |budget| {
            let settings = EkiSettings { max_gens: 5, seed: 77, eval_budget: Some(budget), ..Default::default() };
            run_eki(&problem, random_ensemble(1, 12, 2), &settings).unwrap()
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn discrepancy_rule_stops_early() {
        let forward = FnForward { dim: 2, f: |t: &[f64], _| Ok(t.to_vec()) };
        let problem = InverseProblem::new(forward, data(vec![0.0, 0.0], DMatrix::identity(2, 2)), layout(2)).unwrap();
        let settings = EkiSettings {
            max_gens: 50,
            perturb: false,
            stop: StoppingRule::Discrepancy { threshold: None },
            ..Default::default()
        };
        let h = run_eki(&problem, random_ensemble(2, 10, 2), &settings).unwrap();
        assert!(h.stopped_early);
        assert!(*h.misfits().last().unwrap() <= 1.0);
    }

    #[test]
    fn history_jsonl_round_trip() {
        let forward = FnForward { dim: 1, f: |t: &[f64], _| Ok(vec![t[0]]) };
        let problem = InverseProblem::new(forward, data(vec![1.0], DMatrix::identity(1, 1)), layout(1)).unwrap();
        let h = run_eki(&problem, random_ensemble(3, 4, 1), &EkiSettings { max_gens: 2, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        h.write_jsonl(&mut buf, false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(!text.contains("particles"));
        let back = EkiHistory::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.iter().map(|r| r.misfit_mean).collect::<Vec<_>>(), h.misfits());
        let mut full = Vec::new();
        h.write_jsonl(&mut full, true).unwrap();
        assert_eq!(EkiHistory::read_jsonl(full.as_slice()).unwrap(), h.records);
    }
}
