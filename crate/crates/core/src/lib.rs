//! Simulation and analysis toolkit for budget-split, member-level,
//! campaign-level and switchback experiments in ads marketplaces with
//! budget-constrained campaigns.

pub mod designs;
pub mod engine;
mod error;
pub mod estimators;
pub mod harness;
pub mod models;
pub mod oracle;
pub mod outcome;
pub mod seed;

pub use error::{Error, Result};
