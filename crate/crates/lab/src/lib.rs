//! Config-driven experiment runner.
//!
//! A run reads one JSON config, executes the named experiment, writes CSV
//! artifacts and a `report.json` into the run directory.

// `!(a > b)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{validate, ExperimentConfig, Finding, OUTPUT_ROOT_ENV, SCHEMA_VERSION};
pub use experiments::{output_dir, run, RunError};
pub use report::RunReport;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CRITERION_FAILURE: i32 = 1;
    pub const VALIDATION_ERROR: i32 = 2;
}
