//! Batch-size selection and load costs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{memory_settings, Bytes, Catalog, ModelDescriptor, WorkloadSpec};
use crate::error::ProfileError;
use crate::matching::GroupKey;
use crate::merging::MergeConfig;
use crate::simulator::{SimConfig, Simulation, TraceEvent, TraceKind};

/// Identity of a unit of weights on the GPU.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeightKey {
    Shared(GroupKey),
    Own { query_id: String, position: usize },
}

impl WeightKey {
    /// Key of the layer at `position` of `query_id` under `merged`.
    pub fn of(query_id: &str, position: usize, merged: &MergeConfig) -> WeightKey {
        match merged.set_at(query_id, position) {
            Some(set) => WeightKey::Shared(set.key.clone()),
            None => WeightKey::Own {
                query_id: query_id.to_string(),
                position,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadCost {
    pub bytes: Bytes,
    pub ms: f64,
}

/// Bytes of `model` (serving `query_id`) missing from `resident`, and the
/// time to load them at the model's measured full-load rate.
pub fn load_cost(
    model: &ModelDescriptor,
    query_id: &str,
    resident: &BTreeSet<WeightKey>,
    merged: &MergeConfig,
) -> LoadCost {
    let bytes: Bytes = model
        .layers
        .iter()
        .filter(|l| !resident.contains(&WeightKey::of(query_id, l.position, merged)))
        .map(|l| l.param_bytes)
        .sum();
    let total = model.param_bytes();
    let ms = if total == 0 {
        0.0
    } else {
        model.load_time_ms * bytes as f64 / total as f64
    };
    LoadCost { bytes, ms }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    /// Simulated seconds per candidate evaluation.
    pub eval_horizon_s: f64,
    /// Simulated seconds of the run that reports the plan's throughput.
    pub report_horizon_s: f64,
    /// Largest candidate count searched exhaustively.
    pub exhaustive_cap: usize,
    pub order_policy: String,
    pub sla_ms: Option<f64>,
    pub fps: Option<f64>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            eval_horizon_s: 10.0,
            report_horizon_s: 60.0,
            exhaustive_cap: 1024,
            order_policy: "round_robin".into(),
            sla_ms: None,
            fps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub workload_id: String,
    pub gpu_bytes: Bytes,
    pub batches: BTreeMap<String, u32>,
    /// Lowest per-query processed frames per second over the report run.
    pub min_throughput: f64,
    pub feasible: bool,
    /// Queries whose smallest batch already misses the SLA.
    pub infeasible_queries: Vec<String>,
    pub exhaustive: bool,
    pub evaluations: usize,
}

impl BatchPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Candidates whose minimum processed count is within this many frames of
/// the best minimum are treated as tied on it.
pub const MIN_TIE_FRAMES: u64 = 1;

#[derive(Clone, PartialEq, Eq)]
struct Score {
    min_processed: u64,
    total_processed: u64,
    memory: Bytes,
    choice: Vec<usize>,
}

impl Score {
    /// Order among candidates when the best minimum seen is `anchor`.
    fn key(&self, anchor: u64) -> (bool, u64, u64, Reverse<Bytes>, Reverse<&[usize]>) {
        let tied = self.min_processed + MIN_TIE_FRAMES >= anchor;
        let (min, total) = if tied { (0, self.total_processed) } else { (self.min_processed, 0) };
        (tied, min, total, Reverse(self.memory), Reverse(self.choice.as_slice()))
    }
}

/// Every scored candidate and the best one under the current anchor.
#[derive(Default)]
struct Pool {
    scores: BTreeMap<Vec<usize>, Score>,
    anchor: u64,
}

impl Pool {
    fn add(&mut self, s: Score) {
        self.anchor = self.anchor.max(s.min_processed);
        self.scores.insert(s.choice.clone(), s);
    }

    fn best(&self) -> &Score {
        self.scores
            .values()
            .max_by(|a, b| a.key(self.anchor).cmp(&b.key(self.anchor)))
            .expect("at least one candidate")
    }
}

struct Search<'a> {
    sim: Simulation,
    options: Vec<Vec<usize>>,
    memory: &'a dyn Fn(&[usize]) -> Bytes,
    evaluations: usize,
    pool: Pool,
}

impl Search<'_> {
    fn score(&mut self, choice: Vec<usize>) {
        if self.pool.scores.contains_key(&choice) {
            return;
        }
        self.evaluations += 1;
        let r = self.sim.run_choice(&choice, false);
        self.pool.add(Score {
            min_processed: r.queries.iter().map(|q| q.processed).min().unwrap_or(0),
            total_processed: r.queries.iter().map(|q| q.processed).sum(),
            memory: (self.memory)(&choice),
            choice,
        });
    }

    fn exhaustive(&mut self) -> Vec<usize> {
        let n = self.options.len();
        let mut idx = vec![0; n];
        loop {
            let choice: Vec<usize> = (0..n).map(|q| self.options[q][idx[q]]).collect();
            self.score(choice);
            let mut q = 0;
            loop {
                if q == n {
                    return self.pool.best().choice.clone();
                }
                idx[q] += 1;
                if idx[q] < self.options[q].len() {
                    break;
                }
                idx[q] = 0;
                q += 1;
            }
        }
    }

    /// Coordinate ascent from the smallest batches: scores every single-query
    /// change of the current best until the best stops moving.
    fn ascend(&mut self) -> Vec<usize> {
        self.score(self.options.iter().map(|o| o[0]).collect());
        let mut best = self.pool.best().choice.clone();
        loop {
            for q in 0..self.options.len() {
                for oi in 0..self.options[q].len() {
                    let mut choice = best.clone();
                    choice[q] = self.options[q][oi];
                    self.score(choice);
                }
            }
            let next = self.pool.best().choice.clone();
            if next == best {
                return best;
            }
            best = next;
        }
    }
}

fn sim_config(gpu_bytes: Bytes, merged: Option<&MergeConfig>, opts: &ProfileOptions, duration_s: f64) -> SimConfig {
    SimConfig {
        gpu_bytes,
        sla_ms: opts.sla_ms,
        fps: opts.fps,
        duration_s,
        merge_config: merged.cloned().unwrap_or_default(),
        order_policy: opts.order_policy.clone(),
        ..SimConfig::default()
    }
}

/// Picks the per-query batch sizes that maximize the minimum per-query
/// throughput. Candidates within [`MIN_TIE_FRAMES`] of the best minimum
/// are ranked by total throughput, then lower total run memory, then
/// smaller batches.
pub fn select_batches(
    w: &WorkloadSpec,
    catalog: &Catalog,
    gpu_bytes: Bytes,
    merged: Option<&MergeConfig>,
    opts: &ProfileOptions,
) -> Result<BatchPlan, ProfileError> {
    let min = memory_settings(w, catalog, &|_| 1)?.min;
    if gpu_bytes < min {
        return Err(ProfileError::BelowMinimum { gpu_bytes, min });
    }
    let cfg = sim_config(gpu_bytes, merged, opts, opts.eval_horizon_s);
    let sim = Simulation::new(&cfg, w, catalog)?;
    let reserve = sim.reserve();
    let mut options = Vec::new();
    let mut infeasible_queries = Vec::new();
    let mut run_mem: Vec<Vec<Bytes>> = Vec::new();
    for q in 0..sim.query_count() {
        let opts_q = sim.batch_options(q);
        let sla = sim.sla_ms(q);
        let fitting: Vec<usize> = opts_q
            .iter()
            .enumerate()
            .filter(|(_, (_, mem, infer))| reserve + mem <= gpu_bytes && *infer <= sla)
            .map(|(i, _)| i)
            .collect();
        if fitting.is_empty() {
            infeasible_queries.push(sim.query_ids()[q].clone());
            options.push(vec![0]);
        } else {
            options.push(fitting);
        }
        run_mem.push(opts_q.iter().map(|o| o.1).collect());
    }
    let memory = move |choice: &[usize]| choice.iter().enumerate().map(|(q, &c)| run_mem[q][c]).sum();
    let candidates = options
        .iter()
        .try_fold(1usize, |acc, o| acc.checked_mul(o.len()))
        .unwrap_or(usize::MAX);
    let exhaustive = candidates <= opts.exhaustive_cap;
    let mut search = Search {
        sim,
        options,
        memory: &memory,
        evaluations: 0,
        pool: Pool::default(),
    };
    let best = if exhaustive { search.exhaustive() } else { search.ascend() };
    let report = search.sim.with_duration(opts.report_horizon_s).run_choice(&best, false);
    let batches = report
        .queries
        .iter()
        .map(|q| (q.query_id.clone(), q.batch_size))
        .collect();
    Ok(BatchPlan {
        workload_id: w.workload_id.clone(),
        gpu_bytes,
        batches,
        min_throughput: report.min_throughput(),
        feasible: infeasible_queries.is_empty(),
        infeasible_queries,
        exhaustive,
        evaluations: search.evaluations,
    })
}

/// Events of one full service cycle once the schedule has warmed up: from
/// the second cycle's first turn up to the third cycle's first turn.
pub fn steady_state_cycle(
    w: &WorkloadSpec,
    catalog: &Catalog,
    plan: &BatchPlan,
    merged: Option<&MergeConfig>,
    opts: &ProfileOptions,
) -> Result<Vec<TraceEvent>, ProfileError> {
    let mut cfg = sim_config(plan.gpu_bytes, merged, opts, opts.eval_horizon_s);
    cfg.batch_plan = plan.batches.clone();
    cfg.record_trace = true;
    let report = Simulation::new(&cfg, w, catalog)?.run();
    let trace = report.trace.unwrap_or_default();
    let n = report.queries.len();
    let turn_times: Vec<u64> = trace
        .iter()
        .filter(|e| matches!(e.event_type, TraceKind::RunStart | TraceKind::Skip))
        .map(|e| e.time_us)
        .collect();
    let Some(&from) = turn_times.get(n) else {
        return Ok(trace);
    };
    let until = turn_times.get(2 * n).copied().unwrap_or(u64::MAX);
    Ok(trace
        .into_iter()
        .filter(|e| e.time_us >= from && e.time_us < until)
        .collect())
}

#[cfg(test)]
mod tests;
