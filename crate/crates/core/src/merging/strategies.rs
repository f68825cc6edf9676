use std::collections::BTreeMap;
use std::sync::Arc;

use super::{MergeSession, SharedSet};
use crate::error::MergeError;
use crate::matching::{group_order, Appearance, ShareGroup};

/// A merging heuristic variant. Strategies only decide what to try; the
/// session owns the clock, the oracle and the committed configuration.
pub trait MergeStrategy: Send + Sync {
    fn name(&self) -> &str;
    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError>;
}

/// Walks `groups` in order, halving failed groups while they still reclaim
/// more than the group after them.
fn walk_in_order(session: &mut MergeSession<'_>, groups: &[ShareGroup]) -> Result<(), MergeError> {
    for (i, g) in groups.iter().enumerate() {
        if session.exhausted() {
            break;
        }
        let next = groups.get(i + 1).map_or(0, |n| n.reclaimable_bytes);
        session.attempt_with_halving(g, next)?;
    }
    Ok(())
}

/// Relative depth of each appearance, 0 at the first layer and 1 at the last.
fn depths<'a>(session: &'a MergeSession<'_>, g: &'a ShareGroup) -> impl Iterator<Item = f64> + 'a {
    g.appearances.iter().map(move |a: &Appearance| {
        let n = session
            .problem()
            .query(&a.query_id)
            .map_or(1, |q| q.layer_count);
        if n <= 1 {
            0.0
        } else {
            a.position as f64 / (n - 1) as f64
        }
    })
}

pub struct Gemel;

impl MergeStrategy for Gemel {
    fn name(&self) -> &str {
        "gemel"
    }

    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError> {
        let groups = session.problem().groups.clone();
        walk_in_order(session, &groups)
    }
}

/// Shallowest layers first.
pub struct Earliest;

impl MergeStrategy for Earliest {
    fn name(&self) -> &str {
        "earliest"
    }

    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError> {
        let mut keyed: Vec<(f64, ShareGroup)> = session
            .problem()
            .groups
            .iter()
            .map(|g| (depths(session, g).fold(f64::INFINITY, f64::min), g.clone()))
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| group_order(&a.1, &b.1)));
        let groups: Vec<ShareGroup> = keyed.into_iter().map(|(_, g)| g).collect();
        walk_in_order(session, &groups)
    }
}

/// Deepest layers first.
pub struct Latest;

impl MergeStrategy for Latest {
    fn name(&self) -> &str {
        "latest"
    }

    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError> {
        let mut keyed: Vec<(f64, ShareGroup)> = session
            .problem()
            .groups
            .iter()
            .map(|g| (depths(session, g).fold(f64::NEG_INFINITY, f64::max), g.clone()))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| group_order(&a.1, &b.1)));
        let groups: Vec<ShareGroup> = keyed.into_iter().map(|(_, g)| g).collect();
        walk_in_order(session, &groups)
    }
}

/// Groups in a seeded random order.
pub struct RandomOrder;

impl MergeStrategy for RandomOrder {
    fn name(&self) -> &str {
        "random"
    }

    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError> {
        let mut groups = session.problem().groups.clone();
        session.shuffle(&mut groups);
        walk_in_order(session, &groups)
    }
}

/// Adds two groups per retraining round; a failed pair falls back to the
/// first group alone, and its partner is paired with the group after it.
pub struct TwoGroup;

impl MergeStrategy for TwoGroup {
    fn name(&self) -> &str {
        "two_group"
    }

    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError> {
        let groups = session.problem().groups.clone();
        let mut i = 0;
        while i < groups.len() && !session.exhausted() {
            if let Some(partner) = groups.get(i + 1) {
                let pair = vec![SharedSet::from_group(&groups[i]), SharedSet::from_group(partner)];
                match session.attempt(pair)? {
                    None => break,
                    Some(out) if out.success => {
                        i += 2;
                        continue;
                    }
                    Some(_) => {}
                }
            }
            let next = groups.get(i + 1).map_or(0, |n| n.reclaimable_bytes);
            session.attempt_with_halving(&groups[i], next)?;
            i += 1;
        }
        Ok(())
    }
}

/// Grows each group one query at a time, keeping every addition that the
/// oracle accepts.
pub struct OneModelAtATime;

impl MergeStrategy for OneModelAtATime {
    fn name(&self) -> &str {
        "one_model_at_a_time"
    }

    fn run(&self, session: &mut MergeSession<'_>) -> Result<(), MergeError> {
        let groups = session.problem().groups.clone();
        for g in &groups {
            let mut accepted = SharedSet {
                key: g.key.clone(),
                per_appearance_bytes: g.per_appearance_bytes,
                appearances: [g.appearances[0].clone()].into(),
            };
            for a in &g.appearances[1..] {
                if session.exhausted() {
                    return Ok(());
                }
                let mut candidate = accepted.clone();
                candidate.appearances.insert(a.clone());
                if let Some(out) = session.attempt(vec![candidate.clone()])? {
                    if out.success {
                        accepted = candidate;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Strategies selectable by name at run time.
#[derive(Clone)]
pub struct StrategyRegistry {
    entries: BTreeMap<String, Arc<dyn MergeStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        let builtins: [Arc<dyn MergeStrategy>; 6] = [
            Arc::new(Gemel),
            Arc::new(Earliest),
            Arc::new(Latest),
            Arc::new(RandomOrder),
            Arc::new(TwoGroup),
            Arc::new(OneModelAtATime),
        ];
        for s in builtins {
            r.register(s).expect("builtin names are distinct");
        }
        r
    }

    pub fn register(&mut self, strategy: Arc<dyn MergeStrategy>) -> Result<(), MergeError> {
        let name = strategy.name().to_string();
        if self.entries.contains_key(&name) {
            return Err(MergeError::DuplicateStrategy(name));
        }
        self.entries.insert(name, strategy);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MergeStrategy>, MergeError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| MergeError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
