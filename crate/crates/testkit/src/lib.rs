//! Slow, obviously-correct reference implementations used as test oracles.
//!
//! Nothing here depends on the crates under test.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Event kinds, ordered the same way the production trace breaks time ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TickKind {
    LoadEnd,
    RunEnd,
    Drop,
    Evict,
    LoadStart,
    RunStart,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TickEvent {
    pub time_ms: u64,
    pub kind: TickKind,
    pub query: usize,
    pub bytes: u64,
    pub frames: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickOption {
    pub batch: u64,
    pub infer_ms: u64,
    /// Activation bytes while running.
    pub delta: u64,
}

/// One query. Loading takes one millisecond per missing byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickQuery {
    /// (entity id, bytes); entity ids shared between queries are merged weights.
    pub entities: Vec<(usize, u64)>,
    /// Ascending by batch.
    pub options: Vec<TickOption>,
    pub choice: usize,
    pub period_ms: u64,
    pub phase_ms: u64,
    pub sla_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickInstance {
    pub queries: Vec<TickQuery>,
    pub order: Vec<usize>,
    pub gpu: u64,
    pub reserve: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickOutcome {
    pub events: Vec<TickEvent>,
    pub arrived: Vec<u64>,
    pub processed: Vec<u64>,
}

struct World<'a> {
    inst: &'a TickInstance,
    resident: BTreeSet<usize>,
    present: BTreeMap<usize, u64>,
    events: Vec<TickEvent>,
}

impl World<'_> {
    fn delta(&self, q: usize) -> u64 {
        let spec = &self.inst.queries[q];
        spec.options[spec.choice].delta
    }

    fn distance(&self, from: usize, to: usize) -> usize {
        let n = self.inst.order.len();
        let pos = |q: usize| self.inst.order.iter().position(|&x| x == q).unwrap();
        (pos(to) + n - pos(from)) % n
    }

    fn holds(&self, models: &BTreeSet<usize>, keep: usize) -> BTreeMap<usize, u64> {
        let mut out = BTreeMap::new();
        for &m in models.iter().chain(std::iter::once(&keep)) {
            for &(id, b) in &self.inst.queries[m].entities {
                if m == keep || self.present.contains_key(&id) {
                    out.insert(id, b);
                }
            }
        }
        out
    }

    fn fits(&self, held: &BTreeMap<usize, u64>, next: usize, running: Option<usize>) -> bool {
        let used: u64 = held.values().sum();
        used + self.inst.reserve + self.delta(next) + running.map_or(0, |r| self.delta(r)) <= self.inst.gpu
    }

    /// Evicts models other than `cur` until its activations fit.
    fn make_room(&mut self, cur: usize, t: u64) {
        let mut others: Vec<usize> = self.resident.iter().copied().filter(|&r| r != cur).collect();
        others.sort_by_key(|&r| std::cmp::Reverse(self.distance(cur, r)));
        for r in others {
            let used: u64 = self.present.values().sum();
            if used + self.inst.reserve + self.delta(cur) <= self.inst.gpu {
                break;
            }
            self.resident.remove(&r);
            let mut keep = BTreeSet::new();
            for &m in &self.resident {
                keep.extend(self.inst.queries[m].entities.iter().map(|e| e.0));
            }
            let freed: u64 = self.present.iter().filter(|(id, _)| !keep.contains(*id)).map(|(_, b)| *b).sum();
            self.present.retain(|id, _| keep.contains(id));
            self.events.push(TickEvent { time_ms: t, kind: TickKind::Evict, query: r, bytes: freed, frames: 0 });
        }
    }

    /// Returns the time `next` is ready, or None to defer.
    fn admit(&mut self, next: usize, t: u64, running: Option<usize>) -> Option<u64> {
        if t >= self.inst.duration_ms || self.resident.contains(&next) {
            return Some(t);
        }
        let mut candidates: Vec<usize> = self
            .resident
            .iter()
            .copied()
            .filter(|&r| r != next && Some(r) != running)
            .collect();
        candidates.sort_by_key(|&r| std::cmp::Reverse(self.distance(next, r)));
        if running.is_some() {
            let kept: BTreeSet<usize> = self.resident.iter().copied().filter(|r| !candidates.contains(r)).collect();
            if !self.fits(&self.holds(&kept, next), next, running) {
                return None;
            }
        }
        for r in candidates {
            if self.fits(&self.holds(&self.resident, next), next, running) {
                break;
            }
            self.resident.remove(&r);
            let keep = self.holds(&self.resident, next);
            let freed: u64 = self
                .present
                .iter()
                .filter(|(id, _)| !keep.contains_key(id))
                .map(|(_, b)| *b)
                .sum();
            self.present.retain(|id, _| keep.contains_key(id));
            self.events.push(TickEvent { time_ms: t, kind: TickKind::Evict, query: r, bytes: freed, frames: 0 });
        }
        let missing: u64 = self.inst.queries[next]
            .entities
            .iter()
            .filter(|(id, _)| !self.present.contains_key(id))
            .map(|(_, b)| *b)
            .sum();
        for &(id, b) in &self.inst.queries[next].entities {
            self.present.insert(id, b);
        }
        self.resident.insert(next);
        if missing == 0 {
            return Some(t);
        }
        self.events.push(TickEvent { time_ms: t, kind: TickKind::LoadStart, query: next, bytes: missing, frames: 0 });
        self.events.push(TickEvent { time_ms: t + missing, kind: TickKind::LoadEnd, query: next, bytes: missing, frames: 0 });
        Some(t + missing)
    }
}

/// Advances a clock one millisecond at a time.
pub fn tick_simulate(inst: &TickInstance) -> TickOutcome {
    let n = inst.order.len();
    let nq = inst.queries.len();
    let arrivals: Vec<Vec<u64>> = inst
        .queries
        .iter()
        .map(|q| {
            (0..)
                .map(|k| q.phase_ms + k * q.period_ms)
                .take_while(|&a| a < inst.duration_ms)
                .collect()
        })
        .collect();
    let mut world = World { inst, resident: BTreeSet::new(), present: BTreeMap::new(), events: Vec::new() };
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); nq];
    let mut processed_at: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); nq];
    if n == 0 {
        return finish(inst, world.events, &arrivals, &processed_at);
    }
    let mut ready = world.admit(inst.order[0], 0, None).unwrap();
    let mut run_end: Option<u64> = None;
    let mut deferred: Option<usize> = None;
    let mut waiting_since: Option<u64> = None;
    let mut p = 0;
    let mut skips = 0;
    let horizon = inst.duration_ms + 1_000_000;
    'clock: for t in 0..horizon {
        for (q, arr) in arrivals.iter().enumerate() {
            if arr.binary_search(&t).is_ok() {
                queues[q].push_back(t);
            }
        }
        if run_end == Some(t) {
            run_end = None;
            if let Some(next) = deferred.take() {
                ready = world.admit(next, t, None).unwrap();
            }
        }
        if let Some(since) = waiting_since {
            let any_after = arrivals.iter().flatten().any(|&a| a > since);
            if !any_after {
                break;
            }
            let arrives_now = arrivals.iter().any(|a| a.binary_search(&t).is_ok());
            if t > since && arrives_now {
                waiting_since = None;
                ready = world.admit(inst.order[p], t, None).unwrap();
            } else {
                continue;
            }
        }
        while run_end.is_none() && waiting_since.is_none() && ready <= t {
            if t >= inst.duration_ms {
                break 'clock;
            }
            let cur = inst.order[p];
            let next = inst.order[(p + 1) % n];
            let spec = &inst.queries[cur];
            let queue = &mut queues[cur];
            while queue.front().is_some_and(|&a| a + spec.sla_ms <= t) {
                queue.pop_front();
            }
            let option = spec.options[spec.choice];
            let k = (queue.len() as u64).min(option.batch);
            p = (p + 1) % n;
            if k == 0 {
                world.events.push(TickEvent { time_ms: t, kind: TickKind::Skip, query: cur, bytes: 0, frames: 0 });
                skips += 1;
                if skips >= n {
                    skips = 0;
                    waiting_since = Some(t);
                    if !arrivals.iter().flatten().any(|&a| a > t) {
                        break 'clock;
                    }
                    break;
                }
                ready = world.admit(next, t, None).unwrap();
                continue;
            }
            skips = 0;
            for _ in 0..k {
                let a = queue.pop_front().unwrap();
                processed_at[cur].insert(a);
            }
            let infer = spec.options[..=spec.choice].iter().find(|o| o.batch >= k).unwrap().infer_ms;
            let end = t + infer;
            world.make_room(cur, t);
            world.events.push(TickEvent { time_ms: t, kind: TickKind::RunStart, query: cur, bytes: option.delta, frames: k });
            world.events.push(TickEvent { time_ms: end, kind: TickKind::RunEnd, query: cur, bytes: option.delta, frames: k });
            run_end = Some(end);
            match world.admit(next, t, Some(cur)) {
                Some(r) => ready = r,
                None => deferred = Some(next),
            }
        }
    }
    finish(inst, world.events, &arrivals, &processed_at)
}

fn finish(
    inst: &TickInstance,
    mut events: Vec<TickEvent>,
    arrivals: &[Vec<u64>],
    processed_at: &[BTreeSet<u64>],
) -> TickOutcome {
    for (q, arr) in arrivals.iter().enumerate() {
        for &a in arr {
            if !processed_at[q].contains(&a) {
                events.push(TickEvent {
                    time_ms: a + inst.queries[q].sla_ms,
                    kind: TickKind::Drop,
                    query: q,
                    bytes: 0,
                    frames: 1,
                });
            }
        }
    }
    events.sort();
    TickOutcome {
        events,
        arrived: arrivals.iter().map(|a| a.len() as u64).collect(),
        processed: processed_at.iter().map(|s| s.len() as u64).collect(),
    }
}

/// Bytes needed to hold every model when identical layers may be shared
/// across models but each model needs a distinct copy per position.
/// Allocates copies greedily, one model at a time.
pub fn dedup_bytes(models: &[Vec<(String, u64)>]) -> u64 {
    let mut copies: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    let mut total = 0;
    for model in models {
        let mut used: BTreeMap<&str, usize> = BTreeMap::new();
        for (sig, bytes) in model {
            let n = used.entry(sig).or_default();
            let pool = copies.entry(sig).or_default();
            if *n >= pool.len() {
                pool.push(*bytes);
                total += bytes;
            }
            *n += 1;
        }
    }
    total
}

/// Every per-query batch choice admitted by memory and SLA, scored by the
/// tick simulator. Among choices whose minimum processed count is within one
/// frame of the highest minimum: most frames processed in total, then lowest
/// total run memory, then the lexicographically smallest choice vector.
/// `run_memory[q][c]` is the full run memory of option c.
pub fn best_batches_exhaustive(inst: &TickInstance, run_memory: &[Vec<u64>]) -> Vec<usize> {
    let candidates: Vec<Vec<usize>> = inst
        .queries
        .iter()
        .enumerate()
        .map(|(q, spec)| {
            let ok: Vec<usize> = (0..spec.options.len())
                .filter(|&c| inst.reserve + run_memory[q][c] <= inst.gpu && spec.options[c].infer_ms <= spec.sla_ms)
                .collect();
            if ok.is_empty() {
                vec![0]
            } else {
                ok
            }
        })
        .collect();
    // (min processed, total processed, memory, choice) of every candidate.
    let mut scored: Vec<(u64, u64, u64, Vec<usize>)> = Vec::new();
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == candidates.len() {
            let mut trial = inst.clone();
            for (q, &c) in prefix.iter().enumerate() {
                trial.queries[q].choice = c;
            }
            let out = tick_simulate(&trial);
            let min = out.processed.iter().copied().min().unwrap_or(0);
            let total = out.processed.iter().sum();
            let mem: u64 = prefix.iter().enumerate().map(|(q, &c)| run_memory[q][c]).sum();
            scored.push((min, total, mem, prefix));
            continue;
        }
        for &c in &candidates[prefix.len()] {
            let mut next = prefix.clone();
            next.push(c);
            stack.push(next);
        }
    }
    let top = scored.iter().map(|s| s.0).max().unwrap_or(0);
    let mut tied: Vec<&(u64, u64, u64, Vec<usize>)> = scored.iter().filter(|s| s.0 + 1 >= top).collect();
    tied.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    tied.first().map(|s| s.3.clone()).unwrap_or_default()
}
