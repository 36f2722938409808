//! Simulator for training one classifier across agencies that cannot pool
//! their data: centralized baseline, synchronized parameter averaging,
//! sequential model relay and limited data exchange, plus the closed-form
//! cost comparison between moving data and moving models.

pub mod cli;
pub mod config;
pub mod cost_model;
pub mod data;
pub mod error;
pub mod federation;
pub mod nn;
pub mod presets;
pub mod report;
pub mod rng;
pub mod simnet;

pub use error::{Error, Result};
