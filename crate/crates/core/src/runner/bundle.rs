use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eki::{EkiHistory, Ensemble, GenerationRecord};
use crate::funcparam::ParameterLayout;
use crate::observables::DataVector;

use super::emit::parse_fields;
use super::RunnerError;

pub const OBSERVATION_FILE: &str = "observation.json";
pub const HISTORY_FILE: &str = "eki_history.jsonl";
pub const ENSEMBLE_FILE: &str = "final_ensemble.csv";
pub const COMPARISON_FILE: &str = "fitted_vs_true.csv";
pub const HISTOGRAM_FILE: &str = "histograms.csv";
pub const ACF_FILE: &str = "acf.csv";
pub const FUNCTION_FILE: &str = "functions.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One data-vector entry: the observed value, the statistic of the fitted
/// model at the final ensemble mean, and the standard deviation from `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub data: f64,
    pub fitted: f64,
    pub gamma_sd: f64,
}

/// One histogram bin, truth against fitted model. `component` is `None`
/// for the histogram pooled over all compared components (written as `all`).
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub component: Option<usize>,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub truth: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfRow {
    pub component: usize,
    pub lag: f64,
    pub truth: f64,
    pub fitted: f64,
}

/// A fitted function sampled on a grid, with the truth where it is known.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRow {
    pub function: String,
    pub x: f64,
    pub fitted: f64,
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub model: String,
    pub seed: u64,
    pub ensemble_size: usize,
    pub generations: usize,
    pub stopped_early: bool,
    pub data_dim: usize,
    pub parameter_names: Vec<String>,
    /// Raw parameter values at the final ensemble mean.
    pub final_mean: Vec<f64>,
    /// Raw truth values when the truth model shares the fitted layout.
    pub truth: Option<Vec<f64>>,
    pub initial_misfit: f64,
    pub final_misfit: f64,
    /// Total-variation distance between truth and fitted histograms, per compared component.
    pub tv_components: Vec<usize>,
    pub tv: Vec<f64>,
    /// Distance between the histograms pooled over all compared components.
    pub tv_pooled: f64,
    pub validation_duration: f64,
}

/// Everything a run produces, written under `dir`.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub data: DataVector,
    pub history: Vec<GenerationRecord>,
    pub final_ensemble: Ensemble,
    pub comparison: Vec<ComparisonRow>,
    pub histograms: Vec<HistogramRow>,
    pub acf: Vec<AcfRow>,
    pub functions: Vec<FunctionRow>,
    pub summary: Summary,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, RunnerError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>, RunnerError> {
    File::open(dir.join(name))
        .map(BufReader::new)
        .map_err(|e| RunnerError::DataFile(format!("{}: {e}", dir.join(name).display())))
}

fn records<R: Read>(input: R, width: usize) -> Result<Vec<(usize, csv::StringRecord)>, RunnerError> {
    let mut out = Vec::new();
    for (k, rec) in csv::Reader::from_reader(input).records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| RunnerError::Parse { line, message: e.to_string() })?;
        if rec.len() != width {
            return Err(RunnerError::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn index_field(rec: &csv::StringRecord, line: usize) -> Result<usize, RunnerError> {
    rec[0].parse().map_err(|_| RunnerError::Parse {
        line,
        message: format!("`{}` is not an index", &rec[0]),
    })
}

impl ResultBundle {
    pub(crate) fn write(&self, history: &EkiHistory, layout: &ParameterLayout) -> Result<(), RunnerError> {
        let dir = &self.dir;
        std::fs::create_dir_all(dir)?;
        self.data.write_json(&dir.join(OBSERVATION_FILE))?;

        let mut h = create(dir, HISTORY_FILE)?;
        history.write_jsonl(&mut h, true)?;
        h.flush()?;

        let mut e = create(dir, ENSEMBLE_FILE)?;
        self.final_ensemble.write_csv(&mut e, layout)?;
        e.flush()?;

        let mut w = csv::Writer::from_writer(create(dir, COMPARISON_FILE)?);
        w.write_record(["label", "data", "fitted", "gamma_sd"])?;
        for r in &self.comparison {
            w.write_record([r.label.clone(), r.data.to_string(), r.fitted.to_string(), r.gamma_sd.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(create(dir, HISTOGRAM_FILE)?);
        w.write_record(["component", "bin_lo", "bin_hi", "truth", "fitted"])?;
        for r in &self.histograms {
            w.write_record([
                r.component.map_or_else(|| "all".to_string(), |c| c.to_string()),
                r.bin_lo.to_string(),
                r.bin_hi.to_string(),
                r.truth.to_string(),
                r.fitted.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(create(dir, ACF_FILE)?);
        w.write_record(["component", "lag", "truth", "fitted"])?;
        for r in &self.acf {
            w.write_record([r.component.to_string(), r.lag.to_string(), r.truth.to_string(), r.fitted.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(create(dir, FUNCTION_FILE)?);
        w.write_record(["function", "x", "fitted", "truth"])?;
        for r in &self.functions {
            let truth = r.truth.map(|t| t.to_string()).unwrap_or_default();
            w.write_record([r.function.clone(), r.x.to_string(), r.fitted.to_string(), truth])?;
        }
        w.flush()?;

        let text = serde_json::to_string_pretty(&self.summary).map_err(|e| RunnerError::Io(e.to_string()))?;
        std::fs::write(dir.join(SUMMARY_FILE), text + "\n")?;
        Ok(())
    }

    /// Read back a bundle written by a run with parameter layout `layout`.
    pub fn read(dir: &Path, layout: &ParameterLayout) -> Result<Self, RunnerError> {
        let data = DataVector::read_json(&dir.join(OBSERVATION_FILE))?;
        let history = EkiHistory::read_jsonl(open(dir, HISTORY_FILE)?)?;
        let mut final_ensemble = Ensemble::read_csv(open(dir, ENSEMBLE_FILE)?, layout)?;
        // the CSV holds raw values only; the update count comes from the history
        final_ensemble.generation = history.last().map_or(0, |r| r.gen);

        let mut comparison = Vec::new();
        for (line, rec) in records(open(dir, COMPARISON_FILE)?, 4)? {
            let nums = parse_fields(&csv::StringRecord::from(vec![&rec[1], &rec[2], &rec[3]]), line)?;
            comparison.push(ComparisonRow {
                label: rec[0].to_string(),
                data: nums[0],
                fitted: nums[1],
                gamma_sd: nums[2],
            });
        }

        let mut histograms = Vec::new();
        for (line, rec) in records(open(dir, HISTOGRAM_FILE)?, 5)? {
            let nums = parse_fields(&csv::StringRecord::from(vec![&rec[1], &rec[2], &rec[3], &rec[4]]), line)?;
            histograms.push(HistogramRow {
                component: if &rec[0] == "all" { None } else { Some(index_field(&rec, line)?) },
                bin_lo: nums[0],
                bin_hi: nums[1],
                truth: nums[2],
                fitted: nums[3],
            });
        }

        let mut acf = Vec::new();
        for (line, rec) in records(open(dir, ACF_FILE)?, 4)? {
            let nums = parse_fields(&csv::StringRecord::from(vec![&rec[1], &rec[2], &rec[3]]), line)?;
            acf.push(AcfRow {
                component: index_field(&rec, line)?,
                lag: nums[0],
                truth: nums[1],
                fitted: nums[2],
            });
        }

        let mut functions = Vec::new();
        for (line, rec) in records(open(dir, FUNCTION_FILE)?, 4)? {
            let nums = parse_fields(&csv::StringRecord::from(vec![&rec[1], &rec[2]]), line)?;
            let truth = if rec[3].is_empty() {
                None
            } else {
                Some(parse_fields(&csv::StringRecord::from(vec![&rec[3]]), line)?[0])
            };
            functions.push(FunctionRow {
                function: rec[0].to_string(),
                x: nums[0],
                fitted: nums[1],
                truth,
            });
        }

        let text = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
        let summary: Summary =
            serde_json::from_str(&text).map_err(|e| RunnerError::Parse { line: e.line(), message: e.to_string() })?;

        Ok(Self {
            dir: dir.to_path_buf(),
            data,
            history,
            final_ensemble,
            comparison,
            histograms,
            acf,
            functions,
            summary,
        })
    }
}
