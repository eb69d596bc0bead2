use std::io::{Read, Write};

use crate::funcparam::ScalarFunction;
use crate::observables::compute_acf;
use crate::sde::Trajectory;

use super::RunnerError;

/// Normalized histogram on fixed, equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Probability mass per bin; sums to 1.
    pub masses: Vec<f64>,
}

impl Histogram {
    /// Samples outside `range` are counted in the nearest edge bin.
    pub fn from_samples(samples: &[f64], bins: usize, range: (f64, f64)) -> Self {
        let (lo, hi) = range;
        assert!(bins > 0 && hi > lo, "histogram needs bins over a non-empty range");
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let mut counts = vec![0usize; bins];
        let width = (hi - lo) / bins as f64;
        for &s in samples {
            let b = ((s - lo) / width).floor();
            let b = if b.is_nan() { 0 } else { (b.max(0.0) as usize).min(bins - 1) };
            counts[b] += 1;
        }
        let total = samples.len().max(1) as f64;
        Self {
            edges,
            masses: counts.iter().map(|&c| c as f64 / total).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "mass"])?;
        for (i, m) in self.masses.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, RunnerError> {
        let mut edges = Vec::new();
        let mut masses = Vec::new();
        for (k, rec) in csv::Reader::from_reader(input).records().enumerate() {
            let rec = rec.map_err(|e| RunnerError::Parse { line: k + 2, message: e.to_string() })?;
            let nums = parse_fields(&rec, k + 2)?;
            if nums.len() != 3 {
                return Err(RunnerError::Parse { line: k + 2, message: "expected 3 fields".into() });
            }
            if edges.is_empty() {
                edges.push(nums[0]);
            }
            edges.push(nums[1]);
            masses.push(nums[2]);
        }
        Ok(Self { edges, masses })
    }
}

pub(crate) fn parse_fields(rec: &csv::StringRecord, line: usize) -> Result<Vec<f64>, RunnerError> {
    rec.iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| RunnerError::Parse {
                line,
                message: format!("`{f}` is not a number"),
            })
        })
        .collect()
}

/// Histogram of one component of a trajectory.
pub fn emit_histogram(traj: &Trajectory, component: usize, bins: usize, range: (f64, f64)) -> Histogram {
    Histogram::from_samples(&traj.column(component), bins, range)
}

/// Total-variation distance `½ Σ |p_i - q_i|` between histograms on identical bins.
pub fn compare_invariant_measures(p: &Histogram, q: &Histogram) -> Result<f64, RunnerError> {
    let same_edges = p.edges.len() == q.edges.len()
        && p.edges.iter().zip(&q.edges).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
    if !same_edges {
        return Err(RunnerError::BinMismatch);
    }
    Ok(0.5 * p.masses.iter().zip(&q.masses).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Sampled autocorrelation function of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfTable {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

impl AcfTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag", "acf"])?;
        for (l, v) in self.lags.iter().zip(&self.values) {
            w.write_record([l.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn emit_acf(traj: &Trajectory, component: usize, lags: &[f64]) -> Result<AcfTable, RunnerError> {
    Ok(AcfTable {
        lags: lags.to_vec(),
        values: compute_acf(traj, component, lags)?,
    })
}

/// `(x, f(x))` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

impl FunctionTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"])?;
        for (x, v) in self.x.iter().zip(&self.values) {
            w.write_record([x.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn emit_function_table(f: &dyn ScalarFunction, grid: &[f64]) -> FunctionTable {
    FunctionTable {
        x: grid.to_vec(),
        values: grid.iter().map(|&x| f.value(x)).collect(),
    }
}
