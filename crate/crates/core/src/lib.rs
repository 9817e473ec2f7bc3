//! Optical wide-area network resource allocation, modelled as an integer
//! linear program and compiled to a QUBO for annealing-style samplers.

pub mod analysis;
pub mod error;
pub mod ilp;
pub mod pathgen;
pub mod pipeline;
pub mod qubo;
pub mod sampler;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
