//! Config-driven experiments: data ingestion or truth simulation, `Γ`
//! estimation, ensemble Kalman inversion, long validation runs, and the
//! CSV/JSON files they produce.

mod bundle;
mod config;
mod emit;
mod experiment;
mod ingest;

pub use bundle::{AcfRow, ComparisonRow, FunctionRow, HistogramRow, ResultBundle, Summary};
pub use config::{
    AcfGroup, DataConfig, EkiConfig, ExperimentConfig, GammaConfig, GammaStructure, MomentGroup, ParamValue, PriorSpec,
    SmokeConfig, StatisticsConfig, TruthConfig, ValidationConfig,
};
pub use emit::{
    compare_invariant_measures, emit_acf, emit_function_table, emit_histogram, AcfTable, FunctionTable, Histogram,
};
pub use experiment::{compute_statistics, run_experiment, simulate_truth, ModelForward, RunOptions, TruthOutput};
pub use ingest::{ingest_timeseries, read_trajectory_csv, ColumnRef};

use thiserror::Error;

use crate::eki::EkiError;
use crate::models::ModelError;
use crate::observables::ObservableError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data file error: {0}")]
    DataFile(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("histograms have different bins")]
    BinMismatch,
    #[error(transparent)]
    Eki(#[from] EkiError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunnerError {
    fn from(e: csv::Error) -> Self {
        RunnerError::Io(e.to_string())
    }
}

impl RunnerError {
    /// Process exit code: 2 for configuration, 3 for data, 4 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_)
            | RunnerError::Model(ModelError::Config(_))
            | RunnerError::Model(ModelError::Parameters(_))
            | RunnerError::Observable(ObservableError::InvalidSpec(_)) => 2,
            RunnerError::DataFile(_)
            | RunnerError::Parse { .. }
            | RunnerError::BinMismatch
            | RunnerError::Io(_)
            | RunnerError::Observable(_) => 3,
            RunnerError::Eki(_) | RunnerError::Model(_) => 4,
        }
    }
}
