//! Experiment harness: configuration, datasets, checkpoints, the resumable
//! runner and reports.

pub mod artifacts;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod report;

pub use error::{HarnessError, Result};
