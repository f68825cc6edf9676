//! The shipped corpus: zoo descriptors plus the fifteen workload tables.

use std::fmt;
use std::path::Path;

use gemel_core::catalog::{parse_catalog, parse_workload, parse_workload_str, Catalog, WorkloadDefaults, WorkloadSpec};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::BenchError;
use crate::zoo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WorkloadClass {
    #[serde(rename = "LP")]
    Low,
    #[serde(rename = "MP")]
    Mid,
    #[serde(rename = "HP")]
    High,
}

impl WorkloadClass {
    pub fn label(self) -> &'static str {
        match self {
            WorkloadClass::Low => "LP",
            WorkloadClass::Mid => "MP",
            WorkloadClass::High => "HP",
        }
    }

    /// Class implied by an id such as `HP3`; `None` for other ids.
    pub fn from_id(id: &str) -> Option<Self> {
        match id.get(..2)? {
            "LP" => Some(WorkloadClass::Low),
            "MP" => Some(WorkloadClass::Mid),
            "HP" => Some(WorkloadClass::High),
            _ => None,
        }
    }
}

impl fmt::Display for WorkloadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWorkload {
    pub class: Option<WorkloadClass>,
    pub workload: WorkloadSpec,
}

pub const WORKLOAD_IDS: [&str; 15] = [
    "LP1", "LP2", "LP3", "MP1", "MP2", "MP3", "MP4", "MP5", "MP6", "HP1", "HP2", "HP3", "HP4", "HP5", "HP6",
];

const TABLES: [&str; 15] = [
    include_str!("../../../corpus/workloads/LP1.csv"),
    include_str!("../../../corpus/workloads/LP2.csv"),
    include_str!("../../../corpus/workloads/LP3.csv"),
    include_str!("../../../corpus/workloads/MP1.csv"),
    include_str!("../../../corpus/workloads/MP2.csv"),
    include_str!("../../../corpus/workloads/MP3.csv"),
    include_str!("../../../corpus/workloads/MP4.csv"),
    include_str!("../../../corpus/workloads/MP5.csv"),
    include_str!("../../../corpus/workloads/MP6.csv"),
    include_str!("../../../corpus/workloads/HP1.csv"),
    include_str!("../../../corpus/workloads/HP2.csv"),
    include_str!("../../../corpus/workloads/HP3.csv"),
    include_str!("../../../corpus/workloads/HP4.csv"),
    include_str!("../../../corpus/workloads/HP5.csv"),
    include_str!("../../../corpus/workloads/HP6.csv"),
];

/// The built-in workloads in LP, MP, HP order.
pub fn builtin_workloads(defaults: &WorkloadDefaults) -> Vec<LabeledWorkload> {
    WORKLOAD_IDS
        .iter()
        .zip(TABLES)
        .map(|(id, text)| LabeledWorkload {
            class: WorkloadClass::from_id(id),
            workload: parse_workload_str(id, text, defaults).expect("built-in table parses"),
        })
        .collect()
}

pub fn builtin_workload(id: &str, defaults: &WorkloadDefaults) -> Option<WorkloadSpec> {
    let i = WORKLOAD_IDS.iter().position(|w| *w == id)?;
    Some(parse_workload_str(id, TABLES[i], defaults).expect("built-in table parses"))
}

pub fn catalog(cfg: &Config) -> Result<Catalog, BenchError> {
    match &cfg.corpus.models {
        Some(path) => Ok(parse_catalog(path)?),
        None => Ok(zoo::corpus()),
    }
}

/// Workloads named by the config, or the built-in set, validated against `catalog`.
pub fn workloads(cfg: &Config, catalog: &Catalog) -> Result<Vec<LabeledWorkload>, BenchError> {
    let list = if cfg.corpus.workloads.is_empty() {
        builtin_workloads(&cfg.defaults)
    } else {
        cfg.corpus
            .workloads
            .iter()
            .map(|p| {
                let workload = parse_workload(p, &cfg.defaults)?;
                Ok(LabeledWorkload {
                    class: WorkloadClass::from_id(&workload.workload_id),
                    workload,
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()?
    };
    for w in &list {
        w.workload.validate(catalog)?;
    }
    Ok(list)
}

/// Workloads an experiment runs on: generated ones when generation is on,
/// otherwise those of [`workloads`].
pub fn experiment_workloads(cfg: &Config, catalog: &Catalog) -> Result<Vec<LabeledWorkload>, BenchError> {
    if cfg.generate.enabled {
        crate::generate::generate_workloads(catalog, &cfg.generate, &cfg.defaults, cfg.seed)
    } else {
        workloads(cfg, catalog)
    }
}

/// Resolves a workload argument: a built-in id or a path to a table.
pub fn resolve_workload(arg: &str, cfg: &Config) -> Result<WorkloadSpec, BenchError> {
    if let Some(w) = builtin_workload(arg, &cfg.defaults) {
        return Ok(w);
    }
    let path = Path::new(arg);
    if path.exists() {
        return Ok(parse_workload(path, &cfg.defaults)?);
    }
    Err(BenchError::UnknownWorkload(arg.to_string()))
}
