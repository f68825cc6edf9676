//! TOML configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gemel_core::catalog::WorkloadDefaults;
use gemel_core::merging::{KnobPenalty, MergeSettings, OracleSettings};
use gemel_core::profiler::ProfileOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for experiment cells; 0 lets the pool decide.
    pub threads: usize,
    pub corpus: CorpusConfig,
    pub defaults: WorkloadDefaults,
    pub generate: GenerateConfig,
    pub memory: MemoryConfig,
    pub oracle: OracleSettings,
    pub merge: MergeSettings,
    pub profile: ProfileOptions,
    pub simulation: SimulationConfig,
    pub experiment: ExperimentConfig,
    pub mainstream: MainstreamConfig,
    pub sweep: SweepConfig,
    pub generalization: GeneralizationConfig,
    pub breakdown: BreakdownConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            output_dir: PathBuf::from("gemel-out"),
            threads: 0,
            corpus: CorpusConfig::default(),
            defaults: WorkloadDefaults::default(),
            generate: GenerateConfig::default(),
            memory: MemoryConfig::default(),
            oracle: OracleSettings::default(),
            merge: MergeSettings::default(),
            profile: ProfileOptions::default(),
            simulation: SimulationConfig::default(),
            experiment: ExperimentConfig::default(),
            mainstream: MainstreamConfig::default(),
            sweep: SweepConfig::default(),
            generalization: GeneralizationConfig::default(),
            breakdown: BreakdownConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Descriptor file; the built-in zoo when unset.
    pub models: Option<PathBuf>,
    /// Workload tables; the built-in corpus workloads when empty.
    pub workloads: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Use generated workloads instead of the corpus tables.
    pub enabled: bool,
    pub min_queries: usize,
    pub max_queries: usize,
    /// Above this many candidates, a seeded uniform sample of this size is scored.
    pub candidate_cap: usize,
    pub lp: usize,
    pub mp: usize,
    pub hp: usize,
    pub exclude_zero_savings: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            enabled: false,
            min_queries: 2,
            max_queries: 50,
            candidate_cap: 100_000,
            lp: 3,
            mp: 6,
            hp: 6,
            exclude_zero_savings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    /// Any of `min`, `50`, `75`, `no_swap`.
    pub levels: Vec<String>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            levels: vec!["min".into(), "50".into(), "75".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub duration_s: f64,
    pub order_policy: String,
    pub merged_order_policy: String,
    pub per_frame_accuracy: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            duration_s: 60.0,
            order_policy: "merge_adjacent".into(),
            merged_order_policy: "merge_adjacent".into(),
            per_frame_accuracy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registered merge strategies to run; `gemel` is always included.
    pub strategies: Vec<String>,
    pub optimal: bool,
    pub mainstream: bool,
    /// Merged plans that are also simulated on the edge.
    pub simulate: Vec<String>,
    /// Share of GEMEL's merging minutes used as the common budget when
    /// comparing strategies.
    pub variant_budget_fraction: f64,
    pub write_plans: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategies: vec![
                "gemel".into(),
                "earliest".into(),
                "latest".into(),
                "random".into(),
                "two_group".into(),
                "one_model_at_a_time".into(),
            ],
            optimal: true,
            mainstream: true,
            simulate: vec!["gemel".into(), "optimal".into(), "mainstream".into()],
            variant_budget_fraction: 0.35,
            write_plans: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MainstreamConfig {
    /// Frozen prefix length per model id. Models left out get the default depth.
    pub depths: BTreeMap<String, usize>,
    /// Prefix share kept frozen by the default depth, counted in the oracle's
    /// measure; the oracle's lowest breaking point when unset.
    pub default_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub enabled: bool,
    /// Workload ids to sweep; every workload when empty.
    pub workloads: Vec<String>,
    pub levels: Vec<String>,
    pub sla_ms: Vec<f64>,
    pub fps: Vec<f64>,
    pub accuracy_targets: Vec<f64>,
    /// Plan whose merge configuration is swept.
    pub strategy: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            enabled: false,
            workloads: Vec::new(),
            levels: vec!["min".into()],
            sla_ms: vec![400.0, 300.0, 200.0, 100.0],
            fps: vec![30.0, 15.0, 10.0, 5.0],
            accuracy_targets: vec![0.95, 0.90, 0.85, 0.80],
            strategy: "optimal".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralizationConfig {
    /// Knob sets to vary, each a list drawn from `camera`, `object`, `model`, `scene`.
    pub knob_sets: Vec<Vec<String>>,
    pub min_queries: usize,
    pub max_queries: usize,
    pub repetitions: usize,
    pub accuracy_target: f64,
    /// Tolerance lost per distinct partner value.
    pub diversity: KnobPenalty,
    /// Descriptor file of the generalization models; the built-in list when unset.
    pub models: Option<PathBuf>,
}

impl Default for GeneralizationConfig {
    fn default() -> Self {
        let sets: &[&[&str]] = &[
            &["camera"],
            &["object"],
            &["model"],
            &["camera", "object"],
            &["camera", "model"],
            &["object", "model"],
            &["camera", "object", "model"],
            &["camera", "scene"],
            &["camera", "scene", "object"],
        ];
        GeneralizationConfig {
            knob_sets: sets
                .iter()
                .map(|s| s.iter().map(|k| k.to_string()).collect())
                .collect(),
            min_queries: 2,
            max_queries: 5,
            repetitions: 30,
            accuracy_target: 0.95,
            diversity: KnobPenalty {
                model: 0.05,
                feed: 0.01,
                objects: 0.01,
                scene: 0.01,
            },
            models: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakdownConfig {
    /// Cost of comparing one pair of layer signatures.
    pub matching_us_per_comparison: f64,
    /// Rate at which merged weights are serialized for shipping.
    pub serialization_mb_per_s: f64,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        BreakdownConfig {
            matching_us_per_comparison: 0.5,
            serialization_mb_per_s: 250.0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.corpus.models.as_mut() {
            fix(p);
        }
        cfg.corpus.workloads.iter_mut().for_each(fix);
        if let Some(p) = cfg.oracle.trace_path.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.generalization.models.as_mut() {
            fix(p);
        }
        fix(&mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        for level in self.memory.levels.iter().chain(&self.sweep.levels) {
            if gemel_core::catalog::MemoryLevel::parse(level).is_none() {
                return bad(format!("unknown memory level `{level}`"));
            }
        }
        let g = &self.generate;
        if g.min_queries == 0 || g.min_queries > g.max_queries {
            return bad("generate: 1 <= min_queries <= max_queries".into());
        }
        if g.candidate_cap == 0 {
            return bad("generate: candidate_cap > 0".into());
        }
        let f = self.experiment.variant_budget_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return bad("experiment: variant_budget_fraction in (0, 1]".into());
        }
        let gen = &self.generalization;
        if gen.min_queries < 2 || gen.min_queries > gen.max_queries {
            return bad("generalization: 2 <= min_queries <= max_queries".into());
        }
        for set in &gen.knob_sets {
            if set.is_empty() {
                return bad("generalization: knob sets are non-empty".into());
            }
            for k in set {
                if !matches!(k.as_str(), "camera" | "object" | "model" | "scene") {
                    return bad(format!("generalization: unknown knob `{k}`"));
                }
            }
        }
        if self.simulation.duration_s <= 0.0 {
            return bad("simulation: duration_s > 0".into());
        }
        Ok(())
    }

    /// Stable digest of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
