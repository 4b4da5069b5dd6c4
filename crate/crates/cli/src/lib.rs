//! Batch front end for covsim: simulation runs, ledger audits, sample plans
//! and reports.

pub mod audit;
pub mod config;
pub mod error;
pub mod plan;
pub mod provenance;
pub mod report;
pub mod simulate;

pub use error::{CliError, Result};
