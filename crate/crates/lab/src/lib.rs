//! Experiment pipelines, file formats, statistics and command-line plumbing
//! for swarm exploration studies driven by Boolean networks and Levy walks.

pub mod config;
pub mod error;
pub mod farm;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
