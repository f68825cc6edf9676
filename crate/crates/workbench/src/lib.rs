//! Workload generation, experiment orchestration and reports.

pub mod breakdown;
pub mod config;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod generalize;
pub mod generate;
pub mod mainstream;
pub mod sweep;
pub mod zoo;
