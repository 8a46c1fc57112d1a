//! Quasi-static energy-landscape model of two rigidly connected peg-legged
//! robots crossing a field of semispherical boulders, and a planner that
//! picks the connection length for a given boulder spacing.

pub mod energy;
pub mod cli;
pub mod config;
pub mod error;
pub mod optimize;
pub mod planner;
pub mod quasistatic;
pub mod robot;
pub mod terrain;

pub use error::{Error, Result};
