use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{EkiError, Ensemble};

/// State of one generation, before its update is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub gen: usize,
    /// Misfit of the forward map evaluated at the ensemble mean.
    pub misfit_mean: f64,
    /// Ensemble mean in unconstrained coordinates.
    pub mean: Vec<f64>,
    /// Members whose forward evaluation failed and was replaced.
    #[serde(default)]
    pub failed: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkiHistory {
    pub records: Vec<GenerationRecord>,
    pub final_ensemble: Ensemble,
    /// True when the stopping rule fired before the generation limit.
    pub stopped_early: bool,
}

impl EkiHistory {
    pub fn misfits(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.misfit_mean).collect()
    }

    pub fn final_mean(&self) -> Vec<f64> {
        self.final_ensemble.mean()
    }

    /// One JSON object per line; particle snapshots and forward values only
    /// when `include_particles` is set.
    pub fn write_jsonl<W: Write>(&self, mut out: W, include_particles: bool) -> std::io::Result<()> {
        for r in &self.records {
            let line = if include_particles {
                serde_json::to_string(r)
            } else {
                serde_json::to_string(&GenerationRecord {
                    particles: None,
                    forward: None,
                    ..r.clone()
                })
            }
            .map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<GenerationRecord>, EkiError> {
        input
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .map(|l| {
                let l = l.map_err(|e| EkiError::InvalidEnsemble(e.to_string()))?;
                serde_json::from_str(&l).map_err(|e| EkiError::InvalidEnsemble(e.to_string()))
            })
            .collect()
    }
}
