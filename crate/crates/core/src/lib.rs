//! Genetic programming for regression, classification and denoising.
//!
//! Trees mix scalar primitives with vector-to-scalar reducers, variation
//! operators keep offspring within the depth bound, and populations evolve
//! under steady-state, cellular or island dynamics, optionally on rotating
//! mini-batches. Fitness evaluation fans out over a worker pool without
//! affecting results.

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod genetic_ops;
pub mod learners;
pub mod population;
pub mod primitives;
pub mod scheduler;
pub mod tree;

pub use error::{GpError, Result};
pub use primitives::{Primitive, PrimitiveSet};
pub use tree::{Node, Sample, Tree, TreeConfig};
