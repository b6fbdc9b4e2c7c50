//! Underspecification sets of seed-varied networks, ensembles built by
//! exploring the loss landscape around and between them, and agreement
//! metrics for their gradient explanations.

pub mod data;
pub mod error;
pub mod explain;
pub mod harness;
pub mod landscape;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
