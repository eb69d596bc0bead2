use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::funcparam::ParameterLayout;
use crate::rng::RngStream;

use super::EkiError;

/// Particles as rows of a `J_ens × p` matrix, in unconstrained coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub particles: DMatrix<f64>,
    pub generation: usize,
}

impl Ensemble {
    pub fn new(particles: DMatrix<f64>) -> Result<Self, EkiError> {
        if particles.nrows() < 2 {
            return Err(EkiError::InvalidEnsemble(format!(
                "need at least two members, got {}",
                particles.nrows()
            )));
        }
        if particles.iter().any(|v| !v.is_finite()) {
            return Err(EkiError::InvalidEnsemble("non-finite particle entry".into()));
        }
        Ok(Self {
            particles,
            generation: 0,
        })
    }

    pub fn size(&self) -> usize {
        self.particles.nrows()
    }

    pub fn dim(&self) -> usize {
        self.particles.ncols()
    }

    pub fn member(&self, j: usize) -> Vec<f64> {
        self.particles.row(j).iter().copied().collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.particles.row_mean().iter().copied().collect()
    }

    /// One row per member of raw (constrained) values, headed by coordinate names.
    pub fn write_csv<W: Write>(&self, out: W, layout: &ParameterLayout) -> csv::Result<()> {
        let transforms = layout.coordinate_transforms();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(layout.coordinate_names())?;
        for row in self.particles.row_iter() {
            w.write_record(row.iter().zip(&transforms).map(|(&u, t)| t.to_raw(u).to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`Ensemble::write_csv`].
    pub fn read_csv<R: Read>(input: R, layout: &ParameterLayout) -> Result<Self, EkiError> {
        let transforms = layout.coordinate_transforms();
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| EkiError::InvalidEnsemble(e.to_string()))?;
            if rec.len() != transforms.len() {
                return Err(EkiError::DimensionMismatch(format!(
                    "row has {} columns, layout has {}",
                    rec.len(),
                    transforms.len()
                )));
            }
            for (field, t) in rec.iter().zip(&transforms) {
                let raw: f64 = field
                    .parse()
                    .map_err(|_| EkiError::InvalidEnsemble(format!("not a number: {field}")))?;
                rows.push(t.to_unconstrained(raw));
            }
        }
        let p = transforms.len();
        Self::new(DMatrix::from_row_slice(rows.len() / p.max(1), p, &rows))
    }
}

/// Initial distribution of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Prior {
    /// Uniform between the images of raw bounds `lo` and `hi` in the
    /// unconstrained coordinate (log-uniform for log-transformed slices).
    Uniform { lo: f64, hi: f64 },
    /// Normal centred on the image of the raw value `mean`, with `std`
    /// measured in the unconstrained coordinate.
    Normal { mean: f64, std: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Prior::Uniform { lo, hi } if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() => {
                Err(format!("uniform bounds [{lo}, {hi}] are not ordered"))
            }
            Prior::Normal { mean, std } if !mean.is_finite() || !(std >= 0.0) => {
                Err(format!("normal with mean {mean} and std {std}"))
            }
            _ => Ok(()),
        }
    }
}

/// `j_ens` i.i.d. draws, coordinate by coordinate, in unconstrained space.
pub fn sample_initial_ensemble(
    priors: &[Prior],
    layout: &ParameterLayout,
    j_ens: usize,
    stream: RngStream,
) -> Result<Ensemble, EkiError> {
    let transforms = layout.coordinate_transforms();
    if priors.len() != transforms.len() {
        return Err(EkiError::DimensionMismatch(format!(
            "{} priors for {} coordinates",
            priors.len(),
            transforms.len()
        )));
    }
    for p in priors {
        p.validate().map_err(EkiError::InvalidEnsemble)?;
    }
    let mut rng = stream.generator();
    let mut particles = DMatrix::zeros(j_ens, priors.len());
    for j in 0..j_ens {
        for (k, (prior, t)) in priors.iter().zip(&transforms).enumerate() {
            particles[(j, k)] = match *prior {
                Prior::Uniform { lo, hi } => {
                    let (a, b) = (t.to_unconstrained(lo), t.to_unconstrained(hi));
                    let u: f64 = rng.random();
                    a + (b - a) * u
                }
                Prior::Normal { mean, std } => {
                    let z: f64 = rng.sample(StandardNormal);
                    t.to_unconstrained(mean) + std * z
                }
            };
        }
    }
    Ensemble::new(particles)
}
