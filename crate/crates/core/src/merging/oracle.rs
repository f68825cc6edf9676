//! Retraining oracles answer whether a candidate configuration can meet
//! every participating query's accuracy target, and at what simulated cost.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MergeConfig, MergeProblem, QueryInfo};
use crate::error::{MergeError, OracleError};
use crate::matching::GroupKey;

pub struct OracleRequest<'a> {
    pub problem: &'a MergeProblem,
    /// Candidate configuration including the sets being added.
    pub config: &'a MergeConfig,
    /// Keys of the sets retrained in this request.
    pub added: &'a [GroupKey],
    pub accuracy_targets: &'a BTreeMap<String, f64>,
    pub epoch_budget: u32,
    pub early_fail_after: u32,
}

impl OracleRequest<'_> {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.epoch_budget == 0 || self.early_fail_after == 0 {
            return Err(OracleError::Request("budgets are at least 1".into()));
        }
        if self.early_fail_after > self.epoch_budget {
            return Err(OracleError::Request("early_fail_after <= epoch_budget".into()));
        }
        for key in self.added {
            if self.config.set_for(key).is_none() {
                return Err(OracleError::Request(format!("added set {} missing from config", key.id())));
            }
        }
        Ok(())
    }

    /// Queries with an appearance in one of the added sets, in registration order.
    pub fn participants(&self) -> Vec<&str> {
        let mut ids = BTreeSet::new();
        for key in self.added {
            if let Some(set) = self.config.set_for(key) {
                for a in &set.appearances {
                    ids.insert(a.query_id.as_str());
                }
            }
        }
        self.problem
            .queries
            .iter()
            .map(|q| q.query_id.as_str())
            .filter(|q| ids.contains(q))
            .collect()
    }

    pub fn target(&self, query_id: &str) -> f64 {
        self.accuracy_targets.get(query_id).copied().unwrap_or(1.0)
    }

    /// Stable digest of everything an oracle may depend on.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.problem.workload_id.as_bytes());
        h.update(self.config.fingerprint().as_bytes());
        for key in self.added {
            h.update(key.id().as_bytes());
        }
        for (q, t) in self.accuracy_targets {
            h.update(format!("{q}={t:?};").as_bytes());
        }
        h.update(format!("{}/{}", self.epoch_budget, self.early_fail_after).as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub success: bool,
    pub per_query_accuracy: BTreeMap<String, f64>,
    pub epochs_used: u32,
    pub failing_queries: BTreeSet<String>,
    pub wall_minutes: f64,
    pub shipped_model_ids: BTreeSet<String>,
}

pub trait RetrainingOracle: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, req: &OracleRequest<'_>) -> Result<OracleOutcome, OracleError>;
}

/// Minutes for one epoch over `participants` queries at full data.
fn epoch_minutes(base: f64, baseline: f64, participants: usize) -> f64 {
    base * (participants as f64 / baseline).max(1.0)
}

pub struct AlwaysSucceed {
    pub epoch_minutes: f64,
    pub participant_baseline: f64,
}

impl RetrainingOracle for AlwaysSucceed {
    fn name(&self) -> &str {
        "always-succeed"
    }

    fn evaluate(&self, req: &OracleRequest<'_>) -> Result<OracleOutcome, OracleError> {
        let parts = req.participants();
        Ok(OracleOutcome {
            success: true,
            per_query_accuracy: parts.iter().map(|q| (q.to_string(), 1.0)).collect(),
            epochs_used: 1,
            failing_queries: BTreeSet::new(),
            wall_minutes: epoch_minutes(self.epoch_minutes, self.participant_baseline, parts.len()),
            shipped_model_ids: parts.iter().map(|q| q.to_string()).collect(),
        })
    }
}

pub struct AlwaysFail {
    pub epoch_minutes: f64,
    pub participant_baseline: f64,
}

impl RetrainingOracle for AlwaysFail {
    fn name(&self) -> &str {
        "always-fail"
    }

    fn evaluate(&self, req: &OracleRequest<'_>) -> Result<OracleOutcome, OracleError> {
        let parts = req.participants();
        let epochs = req.early_fail_after;
        Ok(OracleOutcome {
            success: false,
            per_query_accuracy: parts.iter().map(|q| (q.to_string(), 0.0)).collect(),
            epochs_used: epochs,
            failing_queries: parts.iter().map(|q| q.to_string()).collect(),
            wall_minutes: epochs as f64
                * epoch_minutes(self.epoch_minutes, self.participant_baseline, parts.len()),
            shipped_model_ids: BTreeSet::new(),
        })
    }
}

/// Extra loss of tolerance per distinct knob value among a query's sharing partners.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnobPenalty {
    pub model: f64,
    pub feed: f64,
    pub objects: f64,
    pub scene: f64,
}

/// What a breaking point is a fraction of.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedMeasure {
    /// Share of the query's shareable layers that are shared.
    #[default]
    Layers,
    /// Share of the model's parameter bytes that are shared.
    Bytes,
}

/// Calibration of the simulated oracle.
///
/// Each query gets a breaking point (a fraction of its layers or bytes) and a
/// convergence rate, both derived from the seed and the query id. Below the
/// breaking point the reachable accuracy falls slowly; past it, it drops to a
/// cliff level no target accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyModel {
    pub measure: SharedMeasure,
    pub breaking_point: (f64, f64),
    pub convergence_rate: (f64, f64),
    /// Reachable accuracy lost when sharing exactly up to the breaking point.
    pub drop_at_break: f64,
    pub cliff_level: f64,
    pub cliff_slope: f64,
    pub noise: f64,
    pub epoch_minutes: f64,
    pub participant_baseline: f64,
    /// Gap below which later epochs train on a reduced data fraction.
    pub early_success_gap: f64,
    pub min_data_fraction: f64,
    pub diversity: KnobPenalty,
}

impl Default for DifficultyModel {
    fn default() -> Self {
        DifficultyModel {
            measure: SharedMeasure::Layers,
            breaking_point: (0.3, 1.0),
            convergence_rate: (0.02, 0.3),
            drop_at_break: 0.03,
            cliff_level: 0.7,
            cliff_slope: 0.5,
            noise: 0.004,
            epoch_minutes: 30.0,
            participant_baseline: 2.0,
            early_success_gap: 0.03,
            min_data_fraction: 0.1,
            diversity: KnobPenalty::default(),
        }
    }
}

impl DifficultyModel {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::Difficulty(m.into()));
        let (blo, bhi) = self.breaking_point;
        if !(0.0..=1.0).contains(&blo) || !(blo..=1.0).contains(&bhi) {
            return bad("breaking_point is a range within [0, 1]");
        }
        let (rlo, rhi) = self.convergence_rate;
        if !(0.0..1.0).contains(&rlo) || !(rlo..1.0).contains(&rhi) {
            return bad("convergence_rate is a range within [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.drop_at_break)
            || !(0.0..=1.0).contains(&self.cliff_level)
            || self.cliff_level > 1.0 - self.drop_at_break
        {
            return bad("0 <= cliff_level <= 1 - drop_at_break");
        }
        if self.cliff_slope < 0.0 || self.noise < 0.0 {
            return bad("cliff_slope and noise are non-negative");
        }
        if self.epoch_minutes <= 0.0 || self.participant_baseline <= 0.0 {
            return bad("epoch_minutes and participant_baseline are positive");
        }
        if !(0.0..=1.0).contains(&self.min_data_fraction) || self.min_data_fraction == 0.0 {
            return bad("min_data_fraction in (0, 1]");
        }
        let d = &self.diversity;
        if [d.model, d.feed, d.objects, d.scene].iter().any(|x| *x < 0.0) {
            return bad("diversity penalties are non-negative");
        }
        Ok(())
    }

    /// Shared fraction of one query, in the model's measure.
    pub fn shared_fraction(&self, config: &MergeConfig, info: &QueryInfo) -> f64 {
        match self.measure {
            SharedMeasure::Layers if info.shareable_layers > 0 => {
                config.shared_layers_of(&info.query_id) as f64 / info.shareable_layers as f64
            }
            SharedMeasure::Bytes if info.param_bytes > 0 => {
                config.shared_bytes_of(&info.query_id) as f64 / info.param_bytes as f64
            }
            _ => 0.0,
        }
    }

    /// Reachable relative accuracy when `shared` of the query is shared and
    /// the query tolerates up to `breaking_point`.
    pub fn max_achievable(&self, shared: f64, breaking_point: f64) -> f64 {
        if shared <= 0.0 {
            return 1.0;
        }
        if shared <= breaking_point {
            1.0 - self.drop_at_break * shared / breaking_point
        } else {
            (self.cliff_level - self.cliff_slope * (shared - breaking_point)).max(0.0)
        }
    }
}

/// Maps (seed, tag, key) to a uniform value in [0, 1).
fn unit(seed: u64, tag: &str, key: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update([0]);
    h.update(key.as_bytes());
    let d = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&d[..8]);
    (u64::from_le_bytes(first) >> 11) as f64 / (1u64 << 53) as f64
}

fn lerp((lo, hi): (f64, f64), u: f64) -> f64 {
    lo + (hi - lo) * u
}

pub struct SimulatedOracle {
    model: DifficultyModel,
    seed: u64,
}

impl SimulatedOracle {
    pub fn new(model: DifficultyModel, seed: u64) -> Result<Self, OracleError> {
        model.validate()?;
        Ok(SimulatedOracle { model, seed })
    }

    pub fn breaking_point(&self, query_id: &str) -> f64 {
        lerp(self.model.breaking_point, unit(self.seed, "break", query_id))
    }

    pub fn convergence_rate(&self, query_id: &str) -> f64 {
        lerp(self.model.convergence_rate, unit(self.seed, "rate", query_id))
    }

    fn noise(&self, query_id: &str, epoch: u32) -> f64 {
        self.model.noise * (2.0 * unit(self.seed, "noise", &format!("{query_id}#{epoch}")) - 1.0)
    }

    /// Tolerance lost because a query shares with dissimilar partners.
    fn diversity_penalty(&self, req: &OracleRequest<'_>, query_id: &str) -> f64 {
        let d = &self.model.diversity;
        if d.model == 0.0 && d.feed == 0.0 && d.objects == 0.0 && d.scene == 0.0 {
            return 0.0;
        }
        let mut group: BTreeSet<&str> = BTreeSet::new();
        group.insert(query_id);
        for set in &req.config.shared {
            if set.contains_query(query_id) {
                group.extend(set.appearances.iter().map(|a| a.query_id.as_str()));
            }
        }
        let infos: Vec<_> = group.iter().filter_map(|q| req.problem.query(q)).collect();
        let distinct = |f: &dyn Fn(&super::QueryInfo) -> String| {
            let values: BTreeSet<String> = infos.iter().map(|i| f(i)).collect();
            values.len().saturating_sub(1) as f64
        };
        d.model * distinct(&|i| i.model_id.clone())
            + d.feed * distinct(&|i| i.feed_id.clone())
            + d.objects * distinct(&|i| i.objects.iter().cloned().collect::<Vec<_>>().join(","))
            + d.scene * distinct(&|i| i.scene.clone().unwrap_or_default())
    }

    /// Highest accuracy `query_id` can reach under the candidate configuration.
    pub fn asymptote(&self, req: &OracleRequest<'_>, query_id: &str) -> f64 {
        let Some(info) = req.problem.query(query_id) else {
            return 1.0;
        };
        let shared = self.model.shared_fraction(req.config, info);
        let tolerance = (self.breaking_point(query_id) - self.diversity_penalty(req, query_id)).max(0.0);
        self.model.max_achievable(shared, tolerance)
    }
}

impl RetrainingOracle for SimulatedOracle {
    fn name(&self) -> &str {
        "simulated"
    }

    fn evaluate(&self, req: &OracleRequest<'_>) -> Result<OracleOutcome, OracleError> {
        req.validate()?;
        let m = &self.model;
        let parts = req.participants();
        let per_epoch = epoch_minutes(m.epoch_minutes, m.participant_baseline, parts.len());
        let asymptotes: Vec<f64> = parts.iter().map(|q| self.asymptote(req, q)).collect();
        let rates: Vec<f64> = parts.iter().map(|q| self.convergence_rate(q)).collect();
        let accuracy_at = |i: usize, e: u32| -> f64 {
            if asymptotes[i] >= 1.0 {
                return 1.0;
            }
            let raw = asymptotes[i] * (1.0 - rates[i].powi(e as i32)) + self.noise(parts[i], e);
            raw.clamp(0.0, 1.0)
        };
        let mut minutes = 0.0;
        let mut data_fraction = 1.0;
        let mut prev: Vec<f64> = vec![0.0; parts.len()];
        let mut last: Vec<f64> = prev.clone();
        let mut epochs = 0;
        let mut success = false;
        let mut failing = BTreeSet::new();
        for e in 1..=req.epoch_budget {
            epochs = e;
            minutes += per_epoch * data_fraction;
            last = (0..parts.len()).map(|i| accuracy_at(i, e)).collect();
            let below: Vec<usize> = (0..parts.len())
                .filter(|&i| last[i] < req.target(parts[i]))
                .collect();
            if below.is_empty() {
                success = true;
                break;
            }
            if e == req.early_fail_after && e < req.epoch_budget {
                let stalled: BTreeSet<String> = (0..parts.len())
                    .filter(|&i| asymptotes[i] < req.target(parts[i]))
                    .map(|i| parts[i].to_string())
                    .collect();
                if !stalled.is_empty() {
                    failing = stalled;
                    break;
                }
            }
            let gap = below
                .iter()
                .map(|&i| req.target(parts[i]) - last[i])
                .fold(0.0, f64::max);
            let lift = below
                .iter()
                .map(|&i| last[i] - prev[i])
                .fold(f64::INFINITY, f64::min);
            data_fraction = if gap <= m.early_success_gap && lift > 0.0 {
                (gap / lift).clamp(m.min_data_fraction, 1.0)
            } else {
                1.0
            };
            prev = last.clone();
        }
        if !success && failing.is_empty() {
            failing = (0..parts.len())
                .filter(|&i| last[i] < req.target(parts[i]))
                .map(|i| parts[i].to_string())
                .collect();
        }
        Ok(OracleOutcome {
            success,
            per_query_accuracy: parts.iter().zip(&last).map(|(q, a)| (q.to_string(), *a)).collect(),
            epochs_used: epochs,
            failing_queries: failing,
            wall_minutes: minutes,
            shipped_model_ids: if success {
                parts.iter().map(|q| q.to_string()).collect()
            } else {
                BTreeSet::new()
            },
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct TraceFile {
    outcomes: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceEntry {
    config_hash: String,
    outcome: OracleOutcome,
}

/// Replays recorded outcomes keyed by request fingerprint.
pub struct TraceOracle {
    outcomes: BTreeMap<String, OracleOutcome>,
}

impl TraceOracle {
    pub fn from_path(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path).map_err(|e| OracleError::Trace(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let file: TraceFile = serde_json::from_str(text).map_err(|e| OracleError::Trace(e.to_string()))?;
        Ok(TraceOracle {
            outcomes: file
                .outcomes
                .into_iter()
                .map(|e| (e.config_hash, e.outcome))
                .collect(),
        })
    }
}

impl RetrainingOracle for TraceOracle {
    fn name(&self) -> &str {
        "trace"
    }

    fn evaluate(&self, req: &OracleRequest<'_>) -> Result<OracleOutcome, OracleError> {
        let key = req.fingerprint();
        self.outcomes
            .get(&key)
            .cloned()
            .ok_or(OracleError::TraceMiss(key))
    }
}

/// Wraps an oracle and keeps every outcome it returns, for later replay.
pub struct RecordingOracle<'a> {
    inner: &'a dyn RetrainingOracle,
    log: Mutex<BTreeMap<String, OracleOutcome>>,
}

impl<'a> RecordingOracle<'a> {
    pub fn new(inner: &'a dyn RetrainingOracle) -> Self {
        RecordingOracle {
            inner,
            log: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn to_json(&self) -> String {
        let log = self.log.lock().expect("trace log");
        let file = TraceFile {
            outcomes: log
                .iter()
                .map(|(k, o)| TraceEntry {
                    config_hash: k.clone(),
                    outcome: o.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("trace serializes")
    }
}

impl RetrainingOracle for RecordingOracle<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn evaluate(&self, req: &OracleRequest<'_>) -> Result<OracleOutcome, OracleError> {
        let out = self.inner.evaluate(req)?;
        self.log
            .lock()
            .expect("trace log")
            .insert(req.fingerprint(), out.clone());
        Ok(out)
    }
}

/// Everything needed to build any registered oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    pub kind: String,
    pub difficulty: DifficultyModel,
    pub trace_path: Option<PathBuf>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            kind: "simulated".into(),
            difficulty: DifficultyModel::default(),
            trace_path: None,
        }
    }
}

type OracleFactory =
    Arc<dyn Fn(&OracleSettings, u64) -> Result<Box<dyn RetrainingOracle>, OracleError> + Send + Sync>;

/// Oracle constructors selectable by name.
#[derive(Clone)]
pub struct OracleRegistry {
    factories: BTreeMap<String, OracleFactory>,
}

impl OracleRegistry {
    pub fn empty() -> Self {
        OracleRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("always-succeed", |s, _| {
            Ok(Box::new(AlwaysSucceed {
                epoch_minutes: s.difficulty.epoch_minutes,
                participant_baseline: s.difficulty.participant_baseline,
            }))
        });
        r.register("always-fail", |s, _| {
            Ok(Box::new(AlwaysFail {
                epoch_minutes: s.difficulty.epoch_minutes,
                participant_baseline: s.difficulty.participant_baseline,
            }))
        });
        r.register("simulated", |s, seed| {
            Ok(Box::new(SimulatedOracle::new(s.difficulty.clone(), seed)?))
        });
        r.register("trace", |s, _| {
            let path = s
                .trace_path
                .as_ref()
                .ok_or_else(|| OracleError::Trace("trace oracle needs trace_path".into()))?;
            Ok(Box::new(TraceOracle::from_path(path)?))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&OracleSettings, u64) -> Result<Box<dyn RetrainingOracle>, OracleError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, settings: &OracleSettings, seed: u64) -> Result<Box<dyn RetrainingOracle>, MergeError> {
        let factory = self
            .factories
            .get(&settings.kind)
            .ok_or_else(|| MergeError::UnknownOracle(settings.kind.clone()))?;
        Ok(factory(settings, seed)?)
    }
}
