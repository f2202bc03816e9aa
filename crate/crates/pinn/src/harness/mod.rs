//! Experiment harness: configuration, orchestration, metrics, persistence
//! and the table benchmarks behind the CLI.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod run;

pub use bench::{bench, BenchOptions, BenchTable, TableId};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Equation, ExperimentConfig, Mode, QSpec, ResolvedConfig};
pub use dataset::{export_grid, export_points, export_snapshot, import_dataset, Dataset};
pub use metrics::{percent_error, relative_l2};
pub use run::{run, run_observed, ExperimentReport, Prediction, RunOutput};
