//! Experiment harness behind the `vrptight` binary: dataset generation,
//! solving, training, evaluation and the tightness ablation.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod results;

pub use error::{LabError, Result};
