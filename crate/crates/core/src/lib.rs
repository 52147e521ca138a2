//! Training fully connected residual networks with 2-splitting and 3-splitting
//! ADMM, serially or on a pipelined worker-per-block executor.

pub mod admm2;
pub mod admm3;
pub mod analysis;
pub mod assumptions;
pub mod baselines;
mod error;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod schedule;
pub mod solver;
pub mod train;
pub mod updates;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
