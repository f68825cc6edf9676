//! Frozen-stem sharing: each query keeps a frozen prefix of its model and
//! queries whose prefixes agree share them.

use std::collections::BTreeMap;

use gemel_core::catalog::{Bytes, Catalog, ModelDescriptor, WorkloadSpec};
use gemel_core::matching::{stem_share_savings, Appearance, GroupKey, LayerSignature};
use gemel_core::merging::{DifficultyModel, MergeConfig, MergeProblem, SharedMeasure, SharedSet};
use serde::Serialize;

use crate::config::MainstreamConfig;
use crate::error::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainstreamPlan {
    pub workload_id: String,
    pub depths: BTreeMap<String, usize>,
    pub config: MergeConfig,
    /// Savings of every shared stem node, before the one-set-per-key limit.
    pub stem_bytes: Bytes,
    /// Shared fraction of each query, in the oracle's measure.
    pub shared_fraction: BTreeMap<String, f64>,
    /// Reachable relative accuracy of each query that shares a stem.
    pub accuracy: BTreeMap<String, f64>,
    pub param_bytes: Bytes,
}

impl MainstreamPlan {
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
}

/// Longest prefix within `fraction` of the model, counted in layers or bytes.
pub fn default_depth(m: &ModelDescriptor, fraction: f64, measure: SharedMeasure) -> usize {
    if measure == SharedMeasure::Layers {
        return (fraction * m.layers.len() as f64 + 1e-9).floor() as usize;
    }
    let total = m.param_bytes() as f64;
    let mut acc = 0.0;
    for (i, l) in m.layers.iter().enumerate() {
        acc += l.param_bytes as f64;
        if acc > fraction * total {
            return i;
        }
    }
    m.layers.len()
}

#[derive(Default)]
struct Node {
    key: Option<GroupKey>,
    bytes: Bytes,
    appearances: Vec<Appearance>,
    children: BTreeMap<LayerSignature, Node>,
}

fn collect(node: &Node, out: &mut BTreeMap<GroupKey, SharedSet>) {
    for child in node.children.values() {
        if child.appearances.len() >= 2 {
            let set = SharedSet {
                key: child.key.clone().expect("inner node has a key"),
                per_appearance_bytes: child.bytes,
                appearances: child.appearances.iter().cloned().collect(),
            };
            // A key reached through several stems keeps its largest stem.
            let keep = out.get(&set.key).map_or(true, |old| old.appearances.len() < set.appearances.len());
            if keep {
                out.insert(set.key.clone(), set);
            }
        }
        collect(child, out);
    }
}

/// The frozen stems of `w`. The default depth and the accuracy of each
/// sharing query follow `difficulty`; stems are taken up to its lowest
/// breaking point unless the config says otherwise.
pub fn plan(
    w: &WorkloadSpec,
    catalog: &Catalog,
    cfg: &MainstreamConfig,
    difficulty: &DifficultyModel,
) -> Result<MainstreamPlan, BenchError> {
    let fraction = cfg.default_fraction.unwrap_or(difficulty.breaking_point.0);
    let mut depths = BTreeMap::new();
    let mut root = Node::default();
    let mut param_bytes = 0;
    for q in &w.queries {
        let model = catalog.get(&q.model_id)?;
        param_bytes += model.param_bytes();
        let depth = match cfg.depths.get(&model.model_id) {
            Some(d) => (*d).min(model.layers.len()),
            None => default_depth(model, fraction, difficulty.measure),
        };
        depths.insert(model.model_id.clone(), depth);
        let mut seen: BTreeMap<LayerSignature, usize> = BTreeMap::new();
        let mut node = &mut root;
        for (position, layer) in model.layers[..depth].iter().enumerate() {
            let sig = LayerSignature::of(layer);
            let occ = seen.entry(sig.clone()).or_insert(0);
            let key = GroupKey { signature: sig.clone(), occurrence: *occ };
            *occ += 1;
            node = node.children.entry(sig).or_default();
            node.key = Some(key);
            node.bytes = layer.param_bytes;
            node.appearances.push(Appearance { query_id: q.query_id.clone(), position });
        }
    }
    let mut sets = BTreeMap::new();
    collect(&root, &mut sets);
    let config = MergeConfig { shared: sets.into_values().collect(), history: Vec::new() };
    let stem_bytes = stem_share_savings(w, catalog, &depths)?;
    let problem = MergeProblem::new(w, catalog)?;
    let shared_fraction: BTreeMap<String, f64> = problem
        .queries
        .iter()
        .map(|q| (q.query_id.clone(), difficulty.shared_fraction(&config, q)))
        .collect();
    let accuracy = shared_fraction
        .iter()
        .filter(|(_, f)| **f > 0.0)
        .map(|(q, f)| (q.clone(), difficulty.max_achievable(*f, difficulty.breaking_point.0)))
        .collect();
    Ok(MainstreamPlan {
        workload_id: w.workload_id.clone(),
        depths,
        config,
        stem_bytes,
        shared_fraction,
        accuracy,
        param_bytes,
    })
}
