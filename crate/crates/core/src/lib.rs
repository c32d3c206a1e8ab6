//! Stochastic block partitioning over the degree-corrected blockmodel,
//! accelerated by running it on a sampled subgraph and propagating the result.

pub mod blockmodel;
pub mod error;
pub mod generator;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod sbp;
pub mod stats;

pub use error::{Error, Result};
pub use graph::Graph;
