//! Experiment protocol: multi-seed training, periodic evaluation, convergence
//! classification, cost reports and the DP benchmark.

mod config;
mod plot;
mod report;
mod stats;
mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ConvergenceConfig, GradcheckConfig, RunConfig};
pub use plot::{plot_benchmark, plot_learning_curves, plot_profiles, plot_voyage_costs};
pub use report::{
    benchmark, evaluate, gradcheck_suite, ratio_pct, write_benchmark_csv, write_benchmark_summary_csv, write_gradcheck_csv,
    write_report_csv, write_voyages_csv, BenchmarkRow, BenchmarkTable, CostReport, GradcheckRow, ReportRow, VoyageRow,
};
pub use stats::{linear_trend, moving_average, Trend};
pub use train::{
    baseline_cost, load_profiles, train, train_seed, write_curves_csv, write_diagnostics_csv, DiagnosticsRow,
    EvalPoint, RunSummary, SeedRun, SeedSummary,
};

use crate::dp::DpError;
use crate::profiles::ProfileError;
use crate::sim::SimError;
use crate::strategy::StrategyError;
use crate::td3::Td3Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("config {path}: {msg}")]
    ConfigFile { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("plot {path}: {msg}")]
    Plot { path: PathBuf, msg: String },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Td3(#[from] Td3Error),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &std::path::Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}
