//! Batch experiments: configuration, sweeps, metrics and output files.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod summary;

pub use config::{Algorithm, ExperimentConfig, OUTPUT_ROOT_ENV};
pub use experiment::{make_replicate, run_algorithm, run_experiment, schedule_json, write_ensemble_csv, Replicate};
pub use metrics::{natural_rmse, read_metrics, rmse, write_metrics, MetricsRow, METRICS_HEADER};
pub use summary::{format_table, summarize, SummaryRow};
