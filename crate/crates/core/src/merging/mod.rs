//! Incremental merging heuristic, its variants, and retraining oracles.
//!
//! A [`MergeSession`] owns the running configuration and the simulated clock.
//! Strategies decide which shared sets to try next; the session asks the
//! oracle, commits successes and records every iteration.

mod independence;
mod oracle;
mod strategies;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Bytes, Catalog, WorkloadSpec};
use crate::error::MergeError;
use crate::matching::{enumerate_groups, Appearance, GroupKey, ShareGroup};

pub use independence::{independence_experiment, IndependenceRow, INDEPENDENCE_TARGETS};
pub use oracle::{
    AlwaysFail, AlwaysSucceed, DifficultyModel, KnobPenalty, SharedMeasure, OracleOutcome, OracleRegistry,
    OracleRequest, OracleSettings, RecordingOracle, RetrainingOracle, SimulatedOracle,
    TraceOracle,
};
pub use strategies::{
    Earliest, Gemel, Latest, MergeStrategy, OneModelAtATime, RandomOrder, StrategyRegistry,
    TwoGroup,
};

/// Per-query facts the oracles and strategies need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInfo {
    pub query_id: String,
    pub model_id: String,
    pub param_bytes: Bytes,
    pub layer_count: usize,
    /// Layers that appear in some share group of the workload.
    pub shareable_layers: usize,
    pub feed_id: String,
    pub objects: BTreeSet<String>,
    pub scene: Option<String>,
    pub accuracy_target: f64,
}

/// A workload reduced to what merging operates on.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeProblem {
    pub workload_id: String,
    pub queries: Vec<QueryInfo>,
    pub groups: Vec<ShareGroup>,
}

impl MergeProblem {
    pub fn new(w: &WorkloadSpec, catalog: &Catalog) -> Result<Self, MergeError> {
        w.validate(catalog)?;
        let groups = enumerate_groups(w, catalog)?;
        let mut shareable: BTreeMap<&str, usize> = BTreeMap::new();
        for g in &groups {
            for a in &g.appearances {
                *shareable.entry(a.query_id.as_str()).or_default() += 1;
            }
        }
        let mut queries = Vec::with_capacity(w.queries.len());
        for q in &w.queries {
            let m = catalog.get(&q.model_id)?;
            queries.push(QueryInfo {
                query_id: q.query_id.clone(),
                model_id: q.model_id.clone(),
                param_bytes: m.param_bytes(),
                layer_count: m.layers.len(),
                shareable_layers: shareable.get(q.query_id.as_str()).copied().unwrap_or(0),
                feed_id: q.feed_id.clone(),
                objects: q.objects.clone(),
                scene: q.scene.clone(),
                accuracy_target: q.accuracy_target,
            });
        }
        Ok(MergeProblem {
            workload_id: w.workload_id.clone(),
            queries,
            groups,
        })
    }

    pub fn query(&self, query_id: &str) -> Option<&QueryInfo> {
        self.queries.iter().find(|q| q.query_id == query_id)
    }

    pub fn param_bytes(&self) -> Bytes {
        self.queries.iter().map(|q| q.param_bytes).sum()
    }

    pub fn optimal_bytes(&self) -> Bytes {
        self.groups.iter().map(|g| g.reclaimable_bytes).sum()
    }

    /// Position of a query in registration order.
    pub fn query_index(&self, query_id: &str) -> Option<usize> {
        self.queries.iter().position(|q| q.query_id == query_id)
    }
}

/// Appearances of one group that use a single weight copy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SharedSet {
    pub key: GroupKey,
    pub per_appearance_bytes: Bytes,
    pub appearances: BTreeSet<Appearance>,
}

impl SharedSet {
    pub fn from_group(g: &ShareGroup) -> Self {
        SharedSet {
            key: g.key.clone(),
            per_appearance_bytes: g.per_appearance_bytes,
            appearances: g.appearances.iter().cloned().collect(),
        }
    }

    pub fn reclaimable_bytes(&self) -> Bytes {
        self.per_appearance_bytes * (self.appearances.len() as Bytes).saturating_sub(1)
    }

    pub fn id(&self) -> String {
        self.key.id()
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.appearances.iter().any(|a| a.query_id == query_id)
    }
}

/// One oracle call made by a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub group_ids: Vec<String>,
    pub appearances: Vec<Appearance>,
    pub weight_sources: Vec<String>,
    pub success: bool,
    pub epochs: u32,
    pub start_minutes: f64,
    pub wall_minutes: f64,
    pub failing_queries: BTreeSet<String>,
    pub shipped_bytes: Bytes,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    /// Committed sets, kept sorted by group key.
    pub shared: Vec<SharedSet>,
    pub history: Vec<Iteration>,
}

impl MergeConfig {
    pub fn is_empty(&self) -> bool {
        self.shared.is_empty()
    }

    pub fn savings(&self) -> Bytes {
        self.shared.iter().map(SharedSet::reclaimable_bytes).sum()
    }

    /// Inserts or replaces the set for `set.key`.
    pub fn upsert(&mut self, set: SharedSet) {
        match self.shared.binary_search_by(|s| s.key.cmp(&set.key)) {
            Ok(i) => self.shared[i] = set,
            Err(i) => self.shared.insert(i, set),
        }
    }

    pub fn set_for(&self, key: &GroupKey) -> Option<&SharedSet> {
        self.shared
            .binary_search_by(|s| s.key.cmp(key))
            .ok()
            .map(|i| &self.shared[i])
    }

    /// The set holding layer `position` of `query_id`, if any.
    pub fn set_at(&self, query_id: &str, position: usize) -> Option<&SharedSet> {
        self.shared.iter().find(|s| {
            s.appearances.iter().any(|a| a.query_id == query_id && a.position == position)
        })
    }

    /// Map from (query, position) to the index of its shared set.
    pub fn appearance_index(&self) -> BTreeMap<(&str, usize), usize> {
        let mut out = BTreeMap::new();
        for (i, set) in self.shared.iter().enumerate() {
            for a in &set.appearances {
                out.insert((a.query_id.as_str(), a.position), i);
            }
        }
        out
    }

    /// Parameter bytes of `query_id` that sit in a shared set.
    pub fn shared_bytes_of(&self, query_id: &str) -> Bytes {
        self.shared
            .iter()
            .filter(|s| s.contains_query(query_id))
            .map(|s| s.per_appearance_bytes)
            .sum()
    }

    /// Layers of `query_id` that sit in a shared set.
    pub fn shared_layers_of(&self, query_id: &str) -> usize {
        self.shared.iter().filter(|s| s.contains_query(query_id)).count()
    }

    /// Digest of the shared sets, ignoring history.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for set in &self.shared {
            h.update(set.key.signature.canonical().as_bytes());
            h.update(format!("#{}[", set.key.occurrence).as_bytes());
            for a in &set.appearances {
                h.update(format!("{}@{};", a.query_id, a.position).as_bytes());
            }
            h.update(b"]");
        }
        hex::encode(h.finalize())
    }

    pub fn validate(&self, problem: &MergeProblem) -> Result<(), MergeError> {
        let groups: BTreeMap<&GroupKey, &ShareGroup> =
            problem.groups.iter().map(|g| (&g.key, g)).collect();
        for w in self.shared.windows(2) {
            if w[0].key >= w[1].key {
                return Err(MergeError::Invariant("shared sets sorted by unique key".into()));
            }
        }
        for set in &self.shared {
            if set.appearances.len() < 2 {
                return Err(MergeError::Invariant(format!("set {} has fewer than 2 appearances", set.id())));
            }
            let group = groups
                .get(&set.key)
                .ok_or_else(|| MergeError::Invariant(format!("set {} is not a workload group", set.id())))?;
            if !set.appearances.iter().all(|a| group.appearances.contains(a)) {
                return Err(MergeError::Invariant(format!(
                    "set {} holds an appearance outside its group",
                    set.id()
                )));
            }
        }
        Ok(())
    }
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub minutes: f64,
    pub bytes: Bytes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub workload_id: String,
    pub strategy: String,
    pub oracle: String,
    pub seed: u64,
    pub config: MergeConfig,
    pub savings_timeline: Vec<TimelinePoint>,
    pub bandwidth_timeline: Vec<TimelinePoint>,
    pub total_minutes: f64,
    pub budget_exhausted: bool,
    /// Relative accuracy each merged query reached at its last successful retraining.
    pub final_accuracy: BTreeMap<String, f64>,
    pub param_bytes: Bytes,
    pub optimal_bytes: Bytes,
}

impl MergePlan {
    pub fn savings(&self) -> Bytes {
        self.config.savings()
    }

    pub fn savings_fraction(&self) -> f64 {
        if self.param_bytes == 0 {
            0.0
        } else {
            self.savings() as f64 / self.param_bytes as f64
        }
    }

    /// Savings reached by `minutes` on the simulated clock.
    pub fn savings_at(&self, minutes: f64) -> Bytes {
        self.savings_timeline
            .iter()
            .take_while(|p| p.minutes <= minutes)
            .last()
            .map_or(0, |p| p.bytes)
    }

    pub fn training_minutes(&self) -> f64 {
        self.config.history.iter().map(|i| i.wall_minutes).sum()
    }

    pub fn successes(&self) -> usize {
        self.config.history.iter().filter(|i| i.success).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeSettings {
    pub epoch_budget: u32,
    pub early_fail_after: u32,
    /// Stop once the simulated clock would pass this many minutes.
    pub wall_budget_minutes: Option<f64>,
    /// Replaces every query's accuracy target when set.
    pub accuracy_target: Option<f64>,
}

impl Default for MergeSettings {
    fn default() -> Self {
        MergeSettings {
            epoch_budget: 10,
            early_fail_after: 3,
            wall_budget_minutes: None,
            accuracy_target: None,
        }
    }
}

impl MergeSettings {
    pub fn targets(&self, problem: &MergeProblem) -> BTreeMap<String, f64> {
        problem
            .queries
            .iter()
            .map(|q| (q.query_id.clone(), self.accuracy_target.unwrap_or(q.accuracy_target)))
            .collect()
    }
}

/// Result of shrinking a failed group.
#[derive(Debug, Clone, PartialEq)]
pub enum Halving {
    Retain(ShareGroup),
    Discard,
}

/// Keeps `ceil(n/2)` appearances. Appearances of failing queries go first,
/// then the largest accuracy gaps, then ascending query id.
pub fn halve_group(g: &ShareGroup, feedback: &OracleOutcome, targets: &BTreeMap<String, f64>) -> Halving {
    let n = g.appearances.len();
    if n < 3 {
        return Halving::Discard;
    }
    let keep = n.div_ceil(2);
    let gap = |q: &str| {
        let target = targets.get(q).copied().unwrap_or(0.0);
        feedback.per_query_accuracy.get(q).map_or(0.0, |acc| target - acc)
    };
    let mut order: Vec<&Appearance> = g.appearances.iter().collect();
    order.sort_by(|a, b| {
        let fa = feedback.failing_queries.contains(&a.query_id);
        let fb = feedback.failing_queries.contains(&b.query_id);
        fb.cmp(&fa)
            .then_with(|| gap(&b.query_id).total_cmp(&gap(&a.query_id)))
            .then_with(|| a.query_id.cmp(&b.query_id))
    });
    let dropped: BTreeSet<&Appearance> = order[..n - keep].iter().copied().collect();
    let appearances: Vec<Appearance> = g
        .appearances
        .iter()
        .filter(|a| !dropped.contains(a))
        .cloned()
        .collect();
    let k = appearances.len() as Bytes;
    Halving::Retain(ShareGroup {
        key: g.key.clone(),
        layer_type: g.layer_type.clone(),
        appearances,
        per_appearance_bytes: g.per_appearance_bytes,
        total_bytes: g.per_appearance_bytes * k,
        reclaimable_bytes: g.per_appearance_bytes * (k - 1),
    })
}

/// Running state shared by every strategy.
pub struct MergeSession<'a> {
    problem: &'a MergeProblem,
    oracle: &'a dyn RetrainingOracle,
    settings: &'a MergeSettings,
    targets: BTreeMap<String, f64>,
    rng: ChaCha8Rng,
    seed: u64,
    config: MergeConfig,
    minutes: f64,
    savings_timeline: Vec<TimelinePoint>,
    bandwidth_timeline: Vec<TimelinePoint>,
    shipped: Bytes,
    final_accuracy: BTreeMap<String, f64>,
    exhausted: bool,
}

impl<'a> MergeSession<'a> {
    pub fn new(
        problem: &'a MergeProblem,
        oracle: &'a dyn RetrainingOracle,
        settings: &'a MergeSettings,
        seed: u64,
    ) -> Self {
        MergeSession {
            problem,
            oracle,
            settings,
            targets: settings.targets(problem),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            config: MergeConfig::default(),
            minutes: 0.0,
            savings_timeline: vec![TimelinePoint { minutes: 0.0, bytes: 0 }],
            bandwidth_timeline: vec![TimelinePoint { minutes: 0.0, bytes: 0 }],
            shipped: 0,
            final_accuracy: BTreeMap::new(),
            exhausted: false,
        }
    }

    pub fn problem(&self) -> &MergeProblem {
        self.problem
    }

    pub fn targets(&self) -> &BTreeMap<String, f64> {
        &self.targets
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &MergeConfig {
        &self.config
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn minutes(&self) -> f64 {
        self.minutes
    }

    /// Retrains with `sets` added to (or replacing within) the running config.
    /// Returns `None` once the wall-clock budget is spent.
    pub fn attempt(&mut self, sets: Vec<SharedSet>) -> Result<Option<OracleOutcome>, MergeError> {
        if self.exhausted {
            return Ok(None);
        }
        if sets.is_empty() || sets.iter().any(|s| s.appearances.len() < 2) {
            return Err(MergeError::Invariant("attempted set has fewer than 2 appearances".into()));
        }
        let mut candidate = MergeConfig {
            shared: self.config.shared.clone(),
            history: Vec::new(),
        };
        let mut weight_sources = Vec::with_capacity(sets.len());
        for set in &sets {
            let apps: Vec<&Appearance> = set.appearances.iter().collect();
            let source = apps.choose(&mut self.rng).expect("non-empty set");
            weight_sources.push(source.query_id.clone());
            candidate.upsert(set.clone());
        }
        let added: Vec<GroupKey> = sets.iter().map(|s| s.key.clone()).collect();
        let req = OracleRequest {
            problem: self.problem,
            config: &candidate,
            added: &added,
            accuracy_targets: &self.targets,
            epoch_budget: self.settings.epoch_budget,
            early_fail_after: self.settings.early_fail_after,
        };
        req.validate()?;
        let out = self.oracle.evaluate(&req)?;
        if let Some(budget) = self.settings.wall_budget_minutes {
            if self.minutes + out.wall_minutes > budget {
                self.exhausted = true;
                return Ok(None);
            }
        }
        let start = self.minutes;
        self.minutes += out.wall_minutes;
        let mut shipped_bytes = 0;
        if out.success {
            for q in &out.shipped_model_ids {
                if let Some(info) = self.problem.query(q) {
                    shipped_bytes += info.param_bytes;
                }
            }
            for (q, acc) in &out.per_query_accuracy {
                if sets.iter().any(|s| s.contains_query(q)) {
                    self.final_accuracy.insert(q.clone(), *acc);
                }
            }
            self.config.shared = candidate.shared;
            self.shipped += shipped_bytes;
            self.savings_timeline.push(TimelinePoint {
                minutes: self.minutes,
                bytes: self.config.savings(),
            });
            self.bandwidth_timeline.push(TimelinePoint {
                minutes: self.minutes,
                bytes: self.shipped,
            });
        }
        let index = self.config.history.len();
        self.config.history.push(Iteration {
            index,
            group_ids: sets.iter().map(SharedSet::id).collect(),
            appearances: sets.iter().flat_map(|s| s.appearances.iter().cloned()).collect(),
            weight_sources,
            success: out.success,
            epochs: out.epochs_used,
            start_minutes: start,
            wall_minutes: out.wall_minutes,
            failing_queries: out.failing_queries.clone(),
            shipped_bytes,
        });
        Ok(Some(out))
    }

    /// Tries a group at full size, halving on failure while the halved set
    /// still reclaims more than `next_reclaimable`.
    pub fn attempt_with_halving(
        &mut self,
        group: &ShareGroup,
        next_reclaimable: Bytes,
    ) -> Result<bool, MergeError> {
        let mut current = group.clone();
        loop {
            let Some(out) = self.attempt(vec![SharedSet::from_group(&current)])? else {
                return Ok(false);
            };
            if out.success {
                return Ok(true);
            }
            match halve_group(&current, &out, &self.targets) {
                Halving::Retain(h) if h.reclaimable_bytes > next_reclaimable => current = h,
                _ => return Ok(false),
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    pub fn finish(self, strategy: &str) -> MergePlan {
        MergePlan {
            workload_id: self.problem.workload_id.clone(),
            strategy: strategy.to_string(),
            oracle: self.oracle.name().to_string(),
            seed: self.seed,
            config: self.config,
            savings_timeline: self.savings_timeline,
            bandwidth_timeline: self.bandwidth_timeline,
            total_minutes: self.minutes,
            budget_exhausted: self.exhausted,
            final_accuracy: self.final_accuracy,
            param_bytes: self.problem.param_bytes(),
            optimal_bytes: self.problem.optimal_bytes(),
        }
    }
}

/// Runs a registered strategy on a prepared problem.
pub fn run_strategy(
    problem: &MergeProblem,
    oracle: &dyn RetrainingOracle,
    strategy: &dyn MergeStrategy,
    settings: &MergeSettings,
    seed: u64,
) -> Result<MergePlan, MergeError> {
    let mut session = MergeSession::new(problem, oracle, settings, seed);
    strategy.run(&mut session)?;
    let plan = session.finish(strategy.name());
    plan.config.validate(problem)?;
    Ok(plan)
}

/// The memory-forward heuristic: heaviest groups first with halving backoff.
pub fn run_heuristic(
    w: &WorkloadSpec,
    catalog: &Catalog,
    oracle: &dyn RetrainingOracle,
    settings: &MergeSettings,
    seed: u64,
) -> Result<MergePlan, MergeError> {
    let problem = MergeProblem::new(w, catalog)?;
    run_strategy(&problem, oracle, &Gemel, settings, seed)
}

/// Runs the named variant from the built-in registry.
pub fn heuristic_variants(
    w: &WorkloadSpec,
    catalog: &Catalog,
    oracle: &dyn RetrainingOracle,
    variant: &str,
    settings: &MergeSettings,
    seed: u64,
) -> Result<MergePlan, MergeError> {
    let problem = MergeProblem::new(w, catalog)?;
    let registry = StrategyRegistry::with_builtins();
    let strategy = registry.get(variant)?;
    run_strategy(&problem, oracle, strategy.as_ref(), settings, seed)
}

/// A plan that shares every group completely, with no retraining history.
pub fn optimal_plan(problem: &MergeProblem) -> MergePlan {
    let mut config = MergeConfig::default();
    for g in &problem.groups {
        config.upsert(SharedSet::from_group(g));
    }
    let bytes = config.savings();
    MergePlan {
        workload_id: problem.workload_id.clone(),
        strategy: "optimal".into(),
        oracle: "none".into(),
        seed: 0,
        config,
        savings_timeline: vec![
            TimelinePoint { minutes: 0.0, bytes: 0 },
            TimelinePoint { minutes: 0.0, bytes },
        ],
        bandwidth_timeline: vec![TimelinePoint { minutes: 0.0, bytes: 0 }],
        total_minutes: 0.0,
        budget_exhausted: false,
        final_accuracy: BTreeMap::new(),
        param_bytes: problem.param_bytes(),
        optimal_bytes: problem.optimal_bytes(),
    }
}
