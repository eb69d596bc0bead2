use std::io::Write;

use super::SdeError;

/// Uniformly sampled realization of a state process, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    t0: f64,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, t0: f64, dim: usize, data: Vec<f64>) -> Result<Self, SdeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SdeError::InvalidTrajectory(format!("dt must be positive, got {dt}")));
        }
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(SdeError::InvalidTrajectory(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SdeError::InvalidTrajectory(format!(
                "non-finite entry in row {}",
                pos / dim
            )));
        }
        Ok(Self { dt, t0, dim, data })
    }

    /// Build from a single column of samples.
    pub fn from_series(dt: f64, t0: f64, series: Vec<f64>) -> Result<Self, SdeError> {
        Self::new(dt, t0, 1, series)
    }

    pub(crate) fn from_parts_unchecked(dt: f64, t0: f64, dim: usize, data: Vec<f64>) -> Self {
        Self { dt, t0, dim, data }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Time spanned from the first to the last sample.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, row: usize) -> f64 {
        self.t0 + row as f64 * self.dt
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    /// Rows `start..end` as a new trajectory with shifted start time.
    pub fn slice_rows(&self, start: usize, end: usize) -> Trajectory {
        assert!(start < end && end <= self.len(), "bad row range {start}..{end}");
        Trajectory {
            dt: self.dt,
            t0: self.time(start),
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    /// Keep only the listed components, in the listed order.
    pub fn project(&self, components: &[usize]) -> Trajectory {
        assert!(components.iter().all(|&c| c < self.dim));
        let data = self
            .rows()
            .flat_map(|r| components.iter().map(move |&c| r[c]))
            .collect();
        Trajectory {
            dt: self.dt,
            t0: self.t0,
            dim: components.len(),
            data,
        }
    }

    /// Every `factor`-th row.
    pub fn decimate(&self, factor: usize) -> Trajectory {
        let factor = factor.max(1);
        let data = self
            .rows()
            .step_by(factor)
            .flat_map(|r| r.iter().copied())
            .collect();
        Trajectory {
            dt: self.dt * factor as f64,
            t0: self.t0,
            dim: self.dim,
            data,
        }
    }

    /// CSV with header `t,x1,...,xn`, keeping every `decimation`-th row.
    pub fn write_csv<W: Write>(&self, out: W, decimation: usize) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        write!(w, "t")?;
        for c in 1..=self.dim {
            write!(w, ",x{c}")?;
        }
        writeln!(w)?;
        for (i, row) in self.rows().enumerate().step_by(decimation.max(1)) {
            write!(w, "{}", self.time(i))?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}
