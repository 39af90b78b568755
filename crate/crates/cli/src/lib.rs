//! Scenario runner for the `nonmarkov` solvers.
//!
//! Scenarios are TOML files (see [`scenario`]); commands write
//! `trajectory.csv`, `certificate.json`, `resolvent.json` and sweep tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;
pub mod trajectory_csv;

pub use commands::{analytic_table, run, sweep, verify, Outcome, RunSummary, SweepRange};
pub use error::{CliError, Result};
pub use scenario::{RunOptions, Scenario};
pub use trajectory_csv::{read_trajectory, write_trajectory};
