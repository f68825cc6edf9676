use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed descriptor file: {0}")]
    Malformed(String),
    #[error("model {model}{}: violates `{invariant}`", position.map(|p| format!(" layer {p}")).unwrap_or_default())]
    Invalid {
        model: String,
        position: Option<usize>,
        invariant: String,
    },
    #[error("unknown model_id `{0}`")]
    UnknownModel(String),
    #[error("model {model} has no run_profile entry for batch size {batch}")]
    MissingBatch { model: String, batch: u32 },
    #[error("workload {workload}: {message}")]
    Workload { workload: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("frozen prefix {prefix} exceeds the {layers} layers of {model}")]
    PrefixTooLong {
        model: String,
        prefix: usize,
        layers: usize,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("malformed difficulty model: {0}")]
    Difficulty(String),
    #[error("no recorded outcome for configuration {0}")]
    TraceMiss(String),
    #[error("cannot load oracle trace: {0}")]
    Trace(String),
    #[error("invalid oracle request: {0}")]
    Request(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MergeError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown oracle `{0}`")]
    UnknownOracle(String),
    #[error("strategy `{0}` is already registered")]
    DuplicateStrategy(String),
    #[error("internal merge invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Matching(#[from] MatchError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("gpu_bytes {gpu_bytes} cannot hold query {query}, which needs {required} bytes resident")]
    InsufficientMemory {
        query: String,
        required: u64,
        gpu_bytes: u64,
    },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("unknown order policy `{0}`")]
    UnknownOrder(String),
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("gpu_bytes {gpu_bytes} is below the minimum memory setting {min}")]
    BelowMinimum { gpu_bytes: u64, min: u64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}
