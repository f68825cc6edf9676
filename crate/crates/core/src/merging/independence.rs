//! Does a heavy layer's ability to be shared depend on what else is shared?

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{MergeConfig, MergeProblem, OracleRequest, RetrainingOracle, SharedSet};
use crate::error::MergeError;
use crate::matching::GroupKey;

pub const INDEPENDENCE_TARGETS: [f64; 3] = [0.80, 0.90, 0.95];

const RANDOM_SETS: usize = 3;
const RANDOM_SET_MAX: usize = 10;

/// Outcome percentages for one kind of alternate configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceRow {
    pub alternate: String,
    pub trials: usize,
    pub only_alone: f64,
    pub only_alternate: f64,
    pub both: f64,
    pub neither: f64,
}

#[derive(Default)]
struct Tally {
    trials: usize,
    only_alone: usize,
    only_alternate: usize,
    both: usize,
    neither: usize,
}

impl Tally {
    fn add(&mut self, alone: bool, alternate: bool) {
        self.trials += 1;
        match (alone, alternate) {
            (true, true) => self.both += 1,
            (true, false) => self.only_alone += 1,
            (false, true) => self.only_alternate += 1,
            (false, false) => self.neither += 1,
        }
    }

    fn row(&self, name: &str) -> IndependenceRow {
        let pct = |n: usize| {
            if self.trials == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.trials as f64
            }
        };
        IndependenceRow {
            alternate: name.to_string(),
            trials: self.trials,
            only_alone: pct(self.only_alone),
            only_alternate: pct(self.only_alternate),
            both: pct(self.both),
            neither: pct(self.neither),
        }
    }
}

fn succeeds(
    problem: &MergeProblem,
    oracle: &dyn RetrainingOracle,
    keys: &[GroupKey],
    targets: &BTreeMap<String, f64>,
    epoch_budget: u32,
    early_fail_after: u32,
) -> Result<bool, MergeError> {
    let mut config = MergeConfig::default();
    for key in keys {
        let g = problem
            .groups
            .iter()
            .find(|g| &g.key == key)
            .ok_or_else(|| MergeError::Invariant(format!("unknown group {}", key.id())))?;
        config.upsert(SharedSet::from_group(g));
    }
    let req = OracleRequest {
        problem,
        config: &config,
        added: keys,
        accuracy_targets: targets,
        epoch_budget,
        early_fail_after,
    };
    Ok(oracle.evaluate(&req)?.success)
}

/// For the heaviest quarter of each model's layers, compares sharing the
/// layer's group alone against sharing it together with neighbouring groups
/// (one or two positions each side) and with random sets of other groups.
pub fn independence_experiment(
    problem: &MergeProblem,
    oracle: &dyn RetrainingOracle,
    epoch_budget: u32,
    early_fail_after: u32,
    seed: u64,
) -> Result<Vec<IndependenceRow>, MergeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_appearance: BTreeMap<(&str, usize), &GroupKey> = BTreeMap::new();
    for g in &problem.groups {
        for a in &g.appearances {
            by_appearance.insert((a.query_id.as_str(), a.position), &g.key);
        }
    }
    // One representative query per model, in registration order.
    let mut seen_models = BTreeSet::new();
    let mut representatives = Vec::new();
    for q in &problem.queries {
        if seen_models.insert(q.model_id.as_str()) {
            representatives.push(q);
        }
    }
    let mut tallies = [Tally::default(), Tally::default(), Tally::default()];
    let names = ["one_each_side", "two_each_side", "random"];
    let all_keys: Vec<&GroupKey> = problem.groups.iter().map(|g| &g.key).collect();
    for q in representatives {
        let positions: Vec<usize> = (0..q.layer_count).collect();
        let bytes_of = |p: usize| {
            by_appearance
                .get(&(q.query_id.as_str(), p))
                .and_then(|k| problem.groups.iter().find(|g| &g.key == *k))
                .map_or(0, |g| g.per_appearance_bytes)
        };
        let mut heavy = positions.clone();
        heavy.sort_by(|a, b| bytes_of(*b).cmp(&bytes_of(*a)).then(a.cmp(b)));
        heavy.truncate(q.layer_count.div_ceil(4));
        for p in heavy {
            let Some(&target_key) = by_appearance.get(&(q.query_id.as_str(), p)) else {
                continue;
            };
            let neighbours = |reach: usize| {
                let mut keys = vec![target_key.clone()];
                for d in 1..=reach {
                    for np in [p.checked_sub(d), Some(p + d)].into_iter().flatten() {
                        if let Some(k) = by_appearance.get(&(q.query_id.as_str(), np)) {
                            if !keys.contains(k) {
                                keys.push((*k).clone());
                            }
                        }
                    }
                }
                keys
            };
            let mut alternates: Vec<(usize, Vec<GroupKey>)> = vec![(0, neighbours(1)), (1, neighbours(2))];
            let others: Vec<&GroupKey> = all_keys.iter().copied().filter(|k| *k != target_key).collect();
            for _ in 0..RANDOM_SETS {
                if others.is_empty() {
                    break;
                }
                let size = rng.gen_range(1..=RANDOM_SET_MAX.min(others.len()));
                let mut keys = vec![target_key.clone()];
                for i in sample(&mut rng, others.len(), size) {
                    keys.push(others[i].clone());
                }
                alternates.push((2, keys));
            }
            for target in INDEPENDENCE_TARGETS {
                let targets: BTreeMap<String, f64> =
                    problem.queries.iter().map(|q| (q.query_id.clone(), target)).collect();
                let alone = succeeds(problem, oracle, &[target_key.clone()], &targets, epoch_budget, early_fail_after)?;
                for (kind, keys) in &alternates {
                    if keys.len() < 2 {
                        continue;
                    }
                    let alt = succeeds(problem, oracle, keys, &targets, epoch_budget, early_fail_after)?;
                    tallies[*kind].add(alone, alt);
                }
            }
        }
    }
    Ok(tallies.iter().zip(names).map(|(t, n)| t.row(n)).collect())
}
