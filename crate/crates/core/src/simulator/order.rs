use std::collections::BTreeMap;
use std::sync::Arc;

use crate::catalog::Bytes;
use crate::error::SimError;

/// Decides the fixed cyclic order in which queries take turns.
pub trait OrderPolicy: Send + Sync {
    fn name(&self) -> &str;
    /// A permutation of `0..queries.len()`, where `queries[q]` lists the
    /// (weight entity, bytes) pairs query q keeps resident.
    fn order(&self, queries: &[Vec<(usize, Bytes)>]) -> Vec<usize>;
}

/// Registration order.
pub struct RoundRobin;

impl OrderPolicy for RoundRobin {
    fn name(&self) -> &str {
        "round_robin"
    }

    fn order(&self, queries: &[Vec<(usize, Bytes)>]) -> Vec<usize> {
        (0..queries.len()).collect()
    }
}

/// Chains queries greedily so that neighbours share the most weight bytes.
/// Starts from the query sharing the most with everyone; ties go to the
/// earlier registered query.
pub struct MergeAdjacent;

fn shared_bytes(queries: &[Vec<(usize, Bytes)>], a: usize, b: usize, single_owner: &[bool]) -> Bytes {
    queries[a]
        .iter()
        .filter(|(id, _)| !single_owner[*id])
        .filter(|(id, _)| queries[b].iter().any(|(other, _)| other == id))
        .map(|(_, bytes)| *bytes)
        .sum()
}

impl OrderPolicy for MergeAdjacent {
    fn name(&self) -> &str {
        "merge_adjacent"
    }

    fn order(&self, queries: &[Vec<(usize, Bytes)>]) -> Vec<usize> {
        let n = queries.len();
        if n == 0 {
            return Vec::new();
        }
        let entity_count = queries.iter().flatten().map(|(id, _)| id + 1).max().unwrap_or(0);
        let mut owners = vec![0u32; entity_count];
        for q in queries {
            for (id, _) in q {
                owners[*id] += 1;
            }
        }
        let single: Vec<bool> = owners.iter().map(|&c| c <= 1).collect();
        let mut matrix = vec![vec![0; n]; n];
        for a in 0..n {
            for b in (a + 1)..n {
                let s = shared_bytes(queries, a, b, &single);
                matrix[a][b] = s;
                matrix[b][a] = s;
            }
        }
        let totals: Vec<Bytes> = matrix.iter().map(|row| row.iter().sum()).collect();
        let mut start = 0;
        for q in 1..n {
            if totals[q] > totals[start] {
                start = q;
            }
        }
        let mut used = vec![false; n];
        let mut out = vec![start];
        used[start] = true;
        while out.len() < n {
            let last = *out.last().expect("non-empty");
            let mut best: Option<usize> = None;
            for q in 0..n {
                if used[q] {
                    continue;
                }
                best = match best {
                    None => Some(q),
                    Some(b) => {
                        let better = (matrix[last][q], totals[q]) > (matrix[last][b], totals[b]);
                        Some(if better { q } else { b })
                    }
                };
            }
            let q = best.expect("unused query remains");
            used[q] = true;
            out.push(q);
        }
        out
    }
}

/// Order policies selectable by name.
#[derive(Clone)]
pub struct OrderRegistry {
    entries: BTreeMap<String, Arc<dyn OrderPolicy>>,
}

impl OrderRegistry {
    pub fn with_builtins() -> Self {
        let mut entries: BTreeMap<String, Arc<dyn OrderPolicy>> = BTreeMap::new();
        let rr: Arc<dyn OrderPolicy> = Arc::new(RoundRobin);
        let adj: Arc<dyn OrderPolicy> = Arc::new(MergeAdjacent);
        for (name, p) in [
            ("round_robin", rr.clone()),
            ("roundrobin", rr),
            ("merge_adjacent", adj.clone()),
            ("adjacent", adj),
        ] {
            entries.insert(name.to_string(), p);
        }
        OrderRegistry { entries }
    }

    pub fn register(&mut self, policy: Arc<dyn OrderPolicy>) {
        self.entries.insert(policy.name().to_string(), policy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn OrderPolicy>, SimError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| SimError::UnknownOrder(name.to_string()))
    }
}

impl Default for OrderRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
