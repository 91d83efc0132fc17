//! Experiment orchestration on top of `maxsep-core`.
//!
//! A JSON [`config::ExperimentConfig`] describes a dataset, the head variants
//! to compare, the network and optimizer, and the seeds. The protocols in
//! [`protocol`] turn it into training runs whose results land under
//! `<output_dir>/<config hash>/<seed>/<head>/`. [`report`] renders those
//! directories into comparison tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod protocol;
pub mod report;
pub mod store;

pub use error::{CliError, Result};
