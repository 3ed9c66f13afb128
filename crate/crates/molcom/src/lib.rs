//! Experiment runner for the `molcom-core` models: INI-style experiment
//! configs, power and peak-rate sweeps written as CSV, SVG plots of those
//! CSVs, and statistical self-checks of the channel primitives.

pub mod config;
pub mod error;
pub mod plot;
pub mod selftest;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
