//! Joint denoising and rewiring of graphs and node features.

pub mod alignment;
pub mod csbm;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod graph;
pub mod jdr;
pub mod linalg;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
