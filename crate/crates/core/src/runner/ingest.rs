use std::path::Path;

use crate::sde::Trajectory;

use super::RunnerError;

/// Which CSV column to read: a header name, or a zero-based index.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    /// Header names take precedence; a bare integer falls back to an index.
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> RunnerError {
    RunnerError::Parse {
        line,
        message: message.into(),
    }
}

/// One numeric column of a headed CSV file as a scalar trajectory with the
/// given sampling interval, optionally with its mean subtracted.
///
/// Line numbers in errors are 1-based and count the header.
pub fn ingest_timeseries(
    path: &Path,
    column: &ColumnRef,
    sampling_interval: f64,
    remove_mean: bool,
) -> Result<Trajectory, RunnerError> {
    let file = std::fs::File::open(path)
        .map_err(|e| RunnerError::DataFile(format!("{}: {e}", path.display())))?;
    read_series(file, column, sampling_interval, remove_mean)
}

pub(crate) fn read_series<R: std::io::Read>(
    input: R,
    column: &ColumnRef,
    sampling_interval: f64,
    remove_mean: bool,
) -> Result<Trajectory, RunnerError> {
    if !(sampling_interval > 0.0 && sampling_interval.is_finite()) {
        return Err(RunnerError::Config(format!("sampling interval {sampling_interval} must be positive")));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    let idx = match column {
        ColumnRef::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(1, format!("no column named `{name}`")))?,
        ColumnRef::Index(i) => headers
            .iter()
            .position(|h| h == i.to_string())
            .unwrap_or(*i),
    };
    if idx >= headers.len() {
        return Err(parse_error(1, format!("column {idx} beyond {} header fields", headers.len())));
    }
    let mut values = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_error(line, e.to_string()))?;
        let field = rec
            .get(idx)
            .ok_or_else(|| parse_error(line, format!("missing column {idx}")))?;
        let v: f64 = field
            .parse()
            .map_err(|_| parse_error(line, format!("`{field}` is not a number")))?;
        if !v.is_finite() {
            return Err(parse_error(line, format!("non-finite value `{field}`")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_error(1, "no data rows"));
    }
    if remove_mean {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| *v -= mean);
    }
    Trajectory::from_series(sampling_interval, 0.0, values).map_err(|e| RunnerError::DataFile(e.to_string()))
}

/// Read a trajectory written by [`Trajectory::write_csv`]; the spacing is
/// taken from the first two time stamps.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory, RunnerError> {
    let file = std::fs::File::open(path)
        .map_err(|e| RunnerError::DataFile(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(parse_error(1, "expected header `t,x1,...`"));
    }
    let dim = headers.len() - 1;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_error(line, e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(line, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(line, format!("non-finite value `{field}`")));
            }
            if c == 0 {
                times.push(v);
            } else {
                data.push(v);
            }
        }
        if rec.len() != dim + 1 {
            return Err(parse_error(line, format!("expected {} fields, found {}", dim + 1, rec.len())));
        }
    }
    if times.len() < 2 {
        return Err(parse_error(1, "need at least two rows to infer the spacing"));
    }
    let dt = times[1] - times[0];
    Trajectory::new(dt, times[0], dim, data).map_err(|e| RunnerError::DataFile(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn constant_rows_give_constant_series() {
        let t = read_series("t,sst\n0,1.5\n1,1.5\n2,1.5\n".as_bytes(), &ColumnRef::from("sst"), 1.0, false).unwrap();
        assert_eq!(t.as_slice(), &[1.5, 1.5, 1.5]);
        assert_eq!(t.dt(), 1.0);
    }

    #[test]
    fn mean_removal() {
        let csv: String = std::iter::once("x\n".to_string())
            .chain((0..1000).map(|i| format!("{}\n", (i as f64 * 0.37).sin() * 3.0 + 20.0)))
            .collect();
        let t = read_series(csv.as_bytes(), &ColumnRef::Index(0), 1e-6, true).unwrap();
        let x = t.column(0);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let std = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!(mean.abs() < 1e-12 * std);
        assert_eq!(t.dt(), 1e-6);
    }

    #[test]
    fn bad_rows_report_their_line() {
        let err = read_series("x\n1.0\n2.0\nNaN\n".as_bytes(), &ColumnRef::Index(0), 1.0, false).unwrap_err();
        assert!(matches!(err, RunnerError::Parse { line: 4, .. }), "{err:?}");
        let err = read_series("x\n1.0\nabc\n".as_bytes(), &ColumnRef::Index(0), 1.0, false).unwrap_err();
        assert!(matches!(err, RunnerError::Parse { line: 3, .. }));
        let err = read_series("x\n1.0\n".as_bytes(), &ColumnRef::from("y"), 1.0, false).unwrap_err();
        assert!(matches!(err, RunnerError::Parse { line: 1, .. }));
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let t = Trajectory::new(0.25, 1.0, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        t.write_csv(&mut f, 1).unwrap();
        f.flush().unwrap();
        let back = read_trajectory_csv(f.path()).unwrap();
        assert_eq!(back, t);
    }
}
