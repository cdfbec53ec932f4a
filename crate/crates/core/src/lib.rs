//! Simulation and numerical analysis of r-neighbour bootstrap percolation
//! on the binomial random graph G(n,p).

pub mod engine;
pub mod error;
pub mod fmt;
pub mod graph;
pub mod montecarlo;
pub mod rng;
pub mod stages;
pub mod thresholds;

pub use error::{Error, Result};
