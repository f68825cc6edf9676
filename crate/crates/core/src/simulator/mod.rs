//! Deterministic simulation of one edge GPU time-sharing its models.
//!
//! Frames arrive at a fixed rate per feed and carry a deadline of arrival
//! plus SLA. Queries take cyclic turns; a turn dequeues up to one batch of
//! frames whose deadline has not passed, and an empty queue skips the turn.
//! Weights swap in and out whole-model, except that a layer shared through a
//! merge stays resident while any resident model still lists it.

mod engine;
mod order;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Bytes, Catalog, WorkloadSpec};
use crate::error::SimError;
use crate::merging::MergeConfig;

pub use engine::TraceKind;
pub(crate) use engine::{BatchOption, Engine, EngineQuery, RawRun};
pub use order::{MergeAdjacent, OrderPolicy, OrderRegistry, RoundRobin};

/// Arrival pattern of one feed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedSpec {
    pub fps: f64,
    #[serde(default)]
    pub phase_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub gpu_bytes: Bytes,
    /// Replaces every query's SLA when set.
    pub sla_ms: Option<f64>,
    /// Replaces every query's frame rate when set.
    pub fps: Option<f64>,
    /// Per-feed overrides of rate and phase; these win over `fps`.
    pub feeds: BTreeMap<String, FeedSpec>,
    pub duration_s: f64,
    /// Batch size per query id; missing queries use their smallest batch.
    pub batch_plan: BTreeMap<String, u32>,
    pub merge_config: MergeConfig,
    pub order_policy: String,
    /// Relative accuracy of merged queries; missing queries use 1.0.
    pub merged_factor: BTreeMap<String, f64>,
    /// Weight workload accuracy by frames instead of averaging queries.
    pub per_frame_accuracy: bool,
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gpu_bytes: 0,
            sla_ms: None,
            fps: None,
            feeds: BTreeMap::new(),
            duration_s: 60.0,
            batch_plan: BTreeMap::new(),
            merge_config: MergeConfig::default(),
            order_policy: "round_robin".into(),
            merged_factor: BTreeMap::new(),
            per_frame_accuracy: false,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time_us: u64,
    pub event_type: TraceKind,
    pub query_id: String,
    pub bytes: Bytes,
    pub frames: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    pub batch_size: u32,
    pub frames_arrived: u64,
    pub processed: u64,
    pub skipped: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub workload_id: String,
    pub gpu_bytes: Bytes,
    pub duration_s: f64,
    pub order_policy: String,
    pub order: Vec<String>,
    pub queries: Vec<QueryReport>,
    pub workload_accuracy: f64,
    pub time_blocked_loading_ms: f64,
    pub swap_count: u64,
    pub bytes_swapped: Bytes,
    pub high_water_bytes: Bytes,
    pub turns: u64,
    pub skipped_turns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

impl SimReport {
    pub fn arrived(&self) -> u64 {
        self.queries.iter().map(|q| q.frames_arrived).sum()
    }

    pub fn processed(&self) -> u64 {
        self.queries.iter().map(|q| q.processed).sum()
    }

    pub fn skipped(&self) -> u64 {
        self.queries.iter().map(|q| q.skipped).sum()
    }

    pub fn skipped_fraction(&self) -> f64 {
        let a = self.arrived();
        if a == 0 {
            0.0
        } else {
            self.skipped() as f64 / a as f64
        }
    }

    pub fn blocked_fraction(&self) -> f64 {
        self.time_blocked_loading_ms / (self.duration_s * 1000.0)
    }

    /// Minimum per-query processed frames per second.
    pub fn min_throughput(&self) -> f64 {
        self.queries
            .iter()
            .map(|q| q.processed as f64 / self.duration_s)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_id,batch_size,frames_arrived,processed,skipped,accuracy\n");
        for q in &self.queries {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6}\n",
                q.query_id, q.batch_size, q.frames_arrived, q.processed, q.skipped, q.accuracy
            ));
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("time_ms,event_type,query_id,bytes\n");
        for e in self.trace.iter().flatten() {
            out.push_str(&format!(
                "{:.3},{},{},{}\n",
                e.time_us as f64 / 1000.0,
                e.event_type.label(),
                e.query_id,
                e.bytes
            ));
        }
        out
    }
}

/// A compiled workload ready to run under many batch choices.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub(crate) engine: Engine,
    workload_id: String,
    query_ids: Vec<String>,
    base_accuracy: Vec<f64>,
    factor: Vec<f64>,
    choice: Vec<usize>,
    cfg: SimConfig,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, w: &WorkloadSpec, catalog: &Catalog) -> Result<Self, SimError> {
        w.validate(catalog)?;
        if !(cfg.duration_s.is_finite() && cfg.duration_s > 0.0) {
            return Err(SimError::Config("duration_s > 0".into()));
        }
        let index = cfg.merge_config.appearance_index();
        let shared_count = cfg.merge_config.shared.len();
        let mut queries = Vec::with_capacity(w.queries.len());
        let mut choice = Vec::with_capacity(w.queries.len());
        let mut base_accuracy = Vec::new();
        let mut factor = Vec::new();
        for set in &cfg.merge_config.shared {
            for a in &set.appearances {
                if w.query(&a.query_id).is_none() {
                    return Err(SimError::Config(format!(
                        "merge config names query {} outside workload {}",
                        a.query_id, w.workload_id
                    )));
                }
            }
        }
        for (qi, q) in w.queries.iter().enumerate() {
            let model = catalog.get(&q.model_id)?;
            let mut entities: Vec<(usize, Bytes)> = Vec::new();
            let mut own = 0;
            for layer in &model.layers {
                match index.get(&(q.query_id.as_str(), layer.position)) {
                    Some(&set) => {
                        if !entities.iter().any(|(id, _)| *id == set) {
                            entities.push((set, cfg.merge_config.shared[set].per_appearance_bytes));
                        }
                    }
                    None => own += layer.param_bytes,
                }
            }
            entities.push((shared_count + qi, own));
            let options: Vec<BatchOption> = model
                .run_profile
                .iter()
                .map(|(&batch, p)| BatchOption {
                    batch,
                    run_memory: p.run_memory_bytes,
                    delta: p.run_memory_bytes.saturating_sub(model.param_bytes()),
                    infer_us: ((p.inference_time_ms * 1000.0).round() as u64).max(1),
                })
                .collect();
            let wanted = cfg.batch_plan.get(&q.query_id).copied().unwrap_or(options[0].batch);
            let c = options
                .iter()
                .position(|o| o.batch == wanted)
                .ok_or_else(|| SimError::Catalog(crate::error::CatalogError::MissingBatch {
                    model: model.model_id.clone(),
                    batch: wanted,
                }))?;
            let feed = cfg.feeds.get(&q.feed_id);
            let fps = feed.map(|f| f.fps).or(cfg.fps).unwrap_or(q.fps);
            let sla = cfg.sla_ms.unwrap_or(q.sla_ms);
            if !(fps.is_finite() && fps > 0.0) || !(sla.is_finite() && sla > 0.0) {
                return Err(SimError::Config(format!("query {}: fps and sla must be positive", q.query_id)));
            }
            queries.push(EngineQuery {
                entities,
                param_bytes: model.param_bytes(),
                load_time_us: model.load_time_ms * 1000.0,
                options,
                fps,
                phase_us: feed.map_or(0, |f| (f.phase_ms * 1000.0).round().max(0.0) as u64),
                sla_us: ((sla * 1000.0).round() as u64).max(1),
            });
            choice.push(c);
            base_accuracy.push(model.base_accuracy);
            factor.push(cfg.merged_factor.get(&q.query_id).copied().unwrap_or(1.0));
        }
        let mut engine = Engine {
            queries,
            entity_count: shared_count + w.queries.len(),
            order: Vec::new(),
            gpu_bytes: cfg.gpu_bytes,
            reserve: w.framework_reserve_bytes,
            duration_us: (cfg.duration_s * 1e6).round() as u64,
        };
        let policy = OrderRegistry::with_builtins().get(&cfg.order_policy)?;
        let entities: Vec<Vec<(usize, Bytes)>> = engine.queries.iter().map(|q| q.entities.clone()).collect();
        engine.order = policy.order(&entities);
        let sim = Simulation {
            engine,
            workload_id: w.workload_id.clone(),
            query_ids: w.queries.iter().map(|q| q.query_id.clone()).collect(),
            base_accuracy,
            factor,
            choice,
            cfg: cfg.clone(),
        };
        sim.check_memory(&sim.choice)?;
        Ok(sim)
    }

    pub fn query_count(&self) -> usize {
        self.query_ids.len()
    }

    /// Profiled (batch size, run memory, inference ms) per query.
    pub fn batch_options(&self, q: usize) -> Vec<(u32, Bytes, f64)> {
        self.engine.queries[q]
            .options
            .iter()
            .map(|o| (o.batch, o.run_memory, o.infer_us as f64 / 1000.0))
            .collect()
    }

    pub fn sla_ms(&self, q: usize) -> f64 {
        self.engine.queries[q].sla_us as f64 / 1000.0
    }

    pub fn reserve(&self) -> Bytes {
        self.engine.reserve
    }

    pub fn gpu_bytes(&self) -> Bytes {
        self.engine.gpu_bytes
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn check_memory(&self, choice: &[usize]) -> Result<(), SimError> {
        for (q, &c) in choice.iter().enumerate() {
            let required = self.engine.reserve + self.engine.queries[q].options[c].run_memory;
            if required > self.engine.gpu_bytes {
                return Err(SimError::InsufficientMemory {
                    query: self.query_ids[q].clone(),
                    required,
                    gpu_bytes: self.engine.gpu_bytes,
                });
            }
        }
        Ok(())
    }

    /// Same simulation with a different run length.
    pub fn with_duration(&self, duration_s: f64) -> Self {
        let mut s = self.clone();
        s.engine.duration_us = (duration_s * 1e6).round() as u64;
        s.cfg.duration_s = duration_s;
        s
    }

    pub fn run(&self) -> SimReport {
        self.run_choice(&self.choice, self.cfg.record_trace)
    }

    /// Runs with `choice[q]` indexing into `batch_options(q)`.
    pub fn run_choice(&self, choice: &[usize], record: bool) -> SimReport {
        let raw = self.engine.run(choice, record);
        self.report(raw, choice, record)
    }

    fn report(&self, raw: RawRun, choice: &[usize], record: bool) -> SimReport {
        let queries: Vec<QueryReport> = (0..self.query_ids.len())
            .map(|q| {
                let arrived = raw.arrived[q];
                let scale = self.base_accuracy[q] * self.factor[q];
                QueryReport {
                    query_id: self.query_ids[q].clone(),
                    batch_size: self.engine.queries[q].options[choice[q]].batch,
                    frames_arrived: arrived,
                    processed: raw.processed[q],
                    skipped: raw.skipped[q],
                    accuracy: if arrived == 0 {
                        0.0
                    } else {
                        raw.processed[q] as f64 / arrived as f64 * scale
                    },
                }
            })
            .collect();
        let workload_accuracy = if queries.is_empty() {
            0.0
        } else if self.cfg.per_frame_accuracy {
            let arrived: u64 = queries.iter().map(|q| q.frames_arrived).sum();
            let weighted: f64 = queries
                .iter()
                .enumerate()
                .map(|(i, q)| q.processed as f64 * self.base_accuracy[i] * self.factor[i])
                .sum();
            if arrived == 0 {
                0.0
            } else {
                weighted / arrived as f64
            }
        } else {
            queries.iter().map(|q| q.accuracy).sum::<f64>() / queries.len() as f64
        };
        let trace = record.then(|| {
            raw.events
                .iter()
                .map(|e| TraceEvent {
                    time_us: e.time_us,
                    event_type: e.kind,
                    query_id: self.query_ids[e.query].clone(),
                    bytes: e.bytes,
                    frames: e.frames,
                })
                .collect()
        });
        SimReport {
            workload_id: self.workload_id.clone(),
            gpu_bytes: self.engine.gpu_bytes,
            duration_s: self.engine.duration_us as f64 / 1e6,
            order_policy: self.cfg.order_policy.clone(),
            order: self.engine.order.iter().map(|&q| self.query_ids[q].clone()).collect(),
            queries,
            workload_accuracy,
            time_blocked_loading_ms: raw.blocked_us as f64 / 1000.0,
            swap_count: raw.swaps,
            bytes_swapped: raw.bytes_swapped,
            high_water_bytes: raw.high_water,
            turns: raw.turns,
            skipped_turns: raw.skipped_turns,
            trace,
        }
    }
}

pub fn simulate(cfg: &SimConfig, w: &WorkloadSpec, catalog: &Catalog) -> Result<SimReport, SimError> {
    Ok(Simulation::new(cfg, w, catalog)?.run())
}

/// Differences of a merged run against its unmerged baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDelta {
    pub accuracy_delta: f64,
    pub processed_delta: i64,
    pub skipped_delta: i64,
    pub blocked_ms_delta: f64,
    /// Fraction of the baseline's blocked time removed; 0 when the baseline never blocked.
    pub blocked_reduction: f64,
}

pub fn compare_runs(base: &SimReport, merged: &SimReport) -> Result<RunDelta, SimError> {
    if base.workload_id != merged.workload_id {
        return Err(SimError::Mismatch("different workloads".into()));
    }
    if base.duration_s != merged.duration_s || base.gpu_bytes != merged.gpu_bytes {
        return Err(SimError::Mismatch("different duration or memory setting".into()));
    }
    let ids = |r: &SimReport| r.queries.iter().map(|q| q.query_id.clone()).collect::<Vec<_>>();
    if ids(base) != ids(merged) {
        return Err(SimError::Mismatch("different query sets".into()));
    }
    let b = base.time_blocked_loading_ms;
    let m = merged.time_blocked_loading_ms;
    Ok(RunDelta {
        accuracy_delta: merged.workload_accuracy - base.workload_accuracy,
        processed_delta: merged.processed() as i64 - base.processed() as i64,
        skipped_delta: merged.skipped() as i64 - base.skipped() as i64,
        blocked_ms_delta: m - b,
        blocked_reduction: if b > 0.0 { (b - m) / b } else { 0.0 },
    })
}

#[cfg(test)]
mod tests;
