//! Experiment orchestration: dataset generation from both solvers, two-stage
//! training, region-split metrics, multi-seed tables and the CSV/JSON
//! artifacts the plotting scripts read.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod feed;
pub mod io;
pub mod tables;

pub use config::{AlphaMode, ExperimentConfig, HeadBox, Problem};
pub use data::{generate_datasets, Datasets};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, MetricsReport};
pub use tables::{reproduce_tables, Series};
