//! Sparse-by-construction activations and the testbeds used to study them.
//!
//! * [`tiling`]: tiling activation, fuzzy tiling activation and their
//!   sparsity calculators.
//! * [`net`]: a small dense network engine with manual backpropagation.
//! * [`drift`]: the piecewise random walk data stream.
//! * [`supervised`]: online regression on the drift stream.
//! * [`env`] and [`dqn`]: classic-control environments and a DQN agent.
//! * [`metrics`]: sparsity and gradient-interference measurements.

pub mod drift;
pub mod dqn;
pub mod env;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod net;
pub mod seed;
pub mod supervised;
pub mod tiling;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tiling::{SparseVector, TilingConfig};
