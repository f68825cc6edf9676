//! Planning and simulation of layer merging for memory-constrained edge GPUs.
//!
//! - [`catalog`]: model and workload descriptors, memory accounting.
//! - [`matching`]: layer signatures, share groups, savings bounds.
//! - [`merging`]: the merging heuristic, its variants and retraining oracles.
//! - [`profiler`]: batch-size selection and load costs.
//! - [`simulator`]: the swap-aware time-sharing scheduler.

pub mod catalog;
pub mod error;
pub mod matching;
pub mod merging;
pub mod profiler;
pub mod simulator;

#[cfg(test)]
mod testutil;

pub use error::{CatalogError, MatchError, MergeError, OracleError, ProfileError, SimError};
