//! Adaptive sampling-based progressive hedging for convex two-stage
//! stochastic programs over a box.

pub mod baselines;
pub mod controller;
pub mod csd;
pub mod error;
pub mod linesearch;
pub mod metrics;
pub mod model;
pub mod prox;
pub mod report;
pub(crate) mod vector;

pub use error::{Error, Result};
