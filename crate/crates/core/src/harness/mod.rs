//! Experiment orchestration: TOML configs, seeded multi-run execution,
//! pseudo-regret traces, aggregation and CSV / SVG output.
//!
//! A run expands every agent over its `conf_scale` grid and the seed list,
//! runs the jobs in parallel and returns the traces in a fixed order, so the
//! output files do not depend on the number of worker threads.

mod bench;
mod config;
mod output;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::agents::AgentError;
use crate::bounds::BoundError;
use crate::distributions::DistError;
use crate::environments::EnvError;
use crate::estimators::EstimatorError;

pub use bench::{estimator_bench, BenchRow};
pub use config::{
    AgentSpec, ChangingSpec, EnvSpec, ExperimentConfig, FileSpec, HeavyQSpec, HeavyUcrl2Spec, LowerBoundSpec, PsrlSpec,
    QlearningSpec, RestartSpec, RunLength, Ucrl2Spec,
};
pub use output::{
    aggregate, best_conf_scales, plot_svg, read_traces, write_csv, write_summary, PlotMetric, SummaryRow, SUMMARY_HEADER,
    TRACE_HEADER,
};
pub use run::{run_experiment, theory_params, ExperimentResult, RegretTrace, TracePoint};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: usize, message: String },
}

impl HarnessError {
    /// Whether the error comes from the configuration rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Parse(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
