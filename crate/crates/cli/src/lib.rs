//! Experiment driver for the spa-core kernel machines: configuration,
//! landmark-ratio sweeps, plot-data tables and the `verify` suite.

pub mod config;
pub mod plot;
pub mod stats;
pub mod sweep;
pub mod verify;
