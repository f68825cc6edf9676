use gemel_core::error::{CatalogError, MatchError, MergeError, OracleError, ProfileError, SimError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("no candidate workloads: {0}")]
    NoCandidates(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Matching(#[from] MatchError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Error shape printed by the command line.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
}

impl BenchError {
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "config",
            BenchError::Io { .. } => "io",
            BenchError::UnknownWorkload(_) => "unknown_workload",
            BenchError::NoCandidates(_) => "no_candidates",
            BenchError::Catalog(_) => "catalog",
            BenchError::Matching(_) => "matching",
            BenchError::Merge(_) => "merge",
            BenchError::Oracle(_) => "oracle",
            BenchError::Sim(_) => "simulation",
            BenchError::Profile(_) => "profile",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            kind: self.kind(),
            message: self.to_string(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        BenchError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
