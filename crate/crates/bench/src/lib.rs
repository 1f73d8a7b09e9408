//! Experiment harness for `congest-core`.
//!
//! A run takes an [`config::ExperimentConfig`] (graph family and sizes, algorithm with its
//! parameter lists, seeds, constants), executes every cell on a worker pool, validates each one
//! against a sequential oracle and writes `results.csv`, `results.json`, `fits.json` and the
//! wall-clock-free `metrics.json`. The property suites in [`suites`] wrap the same machinery.

pub mod config;
pub mod edgelist;
pub mod export;
pub mod fit;
pub mod run;
pub mod suites;

pub use config::{ConstantsFile, ExperimentConfig};
pub use fit::{Fit, FitError, fit_exponent};
pub use run::{RunOptions, SweepResult, run_config, write_artifacts};
pub use suites::{SUITES, SuiteContext, SuiteReport, run_suite};
