pub mod autograd;
pub mod layers;
pub mod dataset;
pub mod config;
pub mod graph;
pub mod model;
pub mod harness;
pub mod error;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
