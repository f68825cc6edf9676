//! The event loop. Times are integer microseconds.
//!
//! Queries take turns in a fixed cyclic order. A query about to run first
//! evicts other models if its activations would not fit. Once it runs, the
//! next query's missing weights are loaded alongside it if memory admits
//! both; otherwise the load waits until the run finishes, at which point the
//! finished model may itself be evicted.

use serde::{Deserialize, Serialize};

use crate::catalog::Bytes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    LoadEnd,
    RunEnd,
    Drop,
    Evict,
    LoadStart,
    RunStart,
    Skip,
}

impl TraceKind {
    pub fn label(self) -> &'static str {
        match self {
            TraceKind::LoadEnd => "load_end",
            TraceKind::RunEnd => "run_end",
            TraceKind::Drop => "drop",
            TraceKind::Evict => "evict",
            TraceKind::LoadStart => "load_start",
            TraceKind::RunStart => "run_start",
            TraceKind::Skip => "skip",
        }
    }
}

/// Event with the query given by its index in registration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct RawEvent {
    pub time_us: u64,
    pub kind: TraceKind,
    pub query: usize,
    pub bytes: Bytes,
    pub frames: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BatchOption {
    pub batch: u32,
    pub run_memory: Bytes,
    pub delta: Bytes,
    pub infer_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EngineQuery {
    /// (entity id, bytes); the query's unshared layers form one entity.
    pub entities: Vec<(usize, Bytes)>,
    pub param_bytes: Bytes,
    pub load_time_us: f64,
    /// Ascending by batch size.
    pub options: Vec<BatchOption>,
    pub fps: f64,
    pub phase_us: u64,
    pub sla_us: u64,
}

impl EngineQuery {
    fn arrival(&self, k: u64) -> u64 {
        self.phase_us + (k as f64 * 1e6 / self.fps).floor() as u64
    }

    /// Frames that arrive before `duration_us`.
    pub fn total_frames(&self, duration_us: u64) -> u64 {
        if duration_us <= self.phase_us {
            return 0;
        }
        self.arrived_by(duration_us - 1, u64::MAX)
    }

    /// Number of frames with arrival time at or before `t`, capped at `cap`.
    fn arrived_by(&self, t: u64, cap: u64) -> u64 {
        if t < self.phase_us {
            return 0;
        }
        let mut k = ((t - self.phase_us) as f64 * self.fps / 1e6).floor() as u64 + 1;
        while k > 0 && self.arrival(k - 1) > t {
            k -= 1;
        }
        while self.arrival(k) <= t {
            k += 1;
        }
        k.min(cap)
    }

    pub fn load_us(&self, missing: Bytes) -> u64 {
        if self.param_bytes == 0 {
            return 0;
        }
        (missing as f64 * self.load_time_us / self.param_bytes as f64).round() as u64
    }

    /// Time to run `k` frames: the smallest profiled batch that holds them.
    fn infer_us(&self, choice: usize, k: u64) -> u64 {
        self.options[..=choice]
            .iter()
            .find(|o| o.batch as u64 >= k)
            .unwrap_or(&self.options[choice])
            .infer_us
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Engine {
    pub queries: Vec<EngineQuery>,
    pub entity_count: usize,
    /// Cyclic service order as query indices.
    pub order: Vec<usize>,
    pub gpu_bytes: Bytes,
    pub reserve: Bytes,
    pub duration_us: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct RawRun {
    pub arrived: Vec<u64>,
    pub processed: Vec<u64>,
    pub skipped: Vec<u64>,
    pub blocked_us: u64,
    pub swaps: u64,
    pub bytes_swapped: Bytes,
    pub high_water: Bytes,
    pub turns: u64,
    pub skipped_turns: u64,
    pub events: Vec<RawEvent>,
}

struct Run<'a> {
    e: &'a Engine,
    choice: &'a [usize],
    pos: Vec<usize>,
    refcount: Vec<u32>,
    present: Vec<bool>,
    resident_model: Vec<bool>,
    resident_bytes: Bytes,
    mark: Vec<u64>,
    stamp: u64,
    heads: Vec<u64>,
    totals: Vec<u64>,
    out: RawRun,
    record: bool,
}

impl<'a> Run<'a> {
    fn new(e: &'a Engine, choice: &'a [usize], record: bool) -> Self {
        let mut pos = vec![0; e.queries.len()];
        for (i, &q) in e.order.iter().enumerate() {
            pos[q] = i;
        }
        let totals: Vec<u64> = e.queries.iter().map(|q| q.total_frames(e.duration_us)).collect();
        let nq = e.queries.len();
        Run {
            e,
            choice,
            pos,
            refcount: vec![0; e.entity_count],
            present: vec![false; e.entity_count],
            resident_model: vec![false; nq],
            resident_bytes: 0,
            mark: vec![0; e.entity_count],
            stamp: 0,
            heads: vec![0; nq],
            out: RawRun {
                arrived: totals.clone(),
                processed: vec![0; nq],
                skipped: vec![0; nq],
                ..RawRun::default()
            },
            totals,
            record,
        }
    }

    fn event(&mut self, time_us: u64, kind: TraceKind, query: usize, bytes: Bytes, frames: u64) {
        if self.record {
            self.out.events.push(RawEvent {
                time_us,
                kind,
                query,
                bytes,
                frames,
            });
        }
    }

    fn delta(&self, q: usize) -> Bytes {
        self.e.queries[q].options[self.choice[q]].delta
    }

    fn note_usage(&mut self, active_delta: Bytes) {
        let used = self.e.reserve + self.resident_bytes + active_delta;
        self.out.high_water = self.out.high_water.max(used);
    }

    /// Loads `next` at `at`, evicting farthest-next-use models first.
    /// Returns the time its weights are ready, or `None` if it cannot fit
    /// while `running` keeps its weights and activations.
    fn admit(&mut self, next: usize, at: u64, running: Option<usize>) -> Option<u64> {
        if at >= self.e.duration_us || self.resident_model[next] {
            return Some(at);
        }
        let e = self.e;
        let q = &e.queries[next];
        self.stamp += 1;
        let stamp = self.stamp;
        let mut missing = 0;
        for &(id, b) in &q.entities {
            self.mark[id] = stamp;
            if !self.present[id] {
                missing += b;
            }
        }
        let running_delta = running.map_or(0, |r| self.delta(r));
        let fixed = e.reserve + missing + self.delta(next) + running_delta;
        let fits = |resident: Bytes| fixed + resident <= e.gpu_bytes;
        if !fits(self.resident_bytes) {
            let n = e.order.len();
            let mut candidates: Vec<usize> = (0..e.queries.len())
                .filter(|&r| self.resident_model[r] && r != next && Some(r) != running)
                .collect();
            candidates.sort_by_key(|&r| std::cmp::Reverse((self.pos[r] + n - self.pos[next]) % n));
            if running.is_some() {
                let mut counts = self.refcount.clone();
                let mut freeable = 0;
                for &r in &candidates {
                    for &(id, b) in &e.queries[r].entities {
                        counts[id] -= 1;
                        if counts[id] == 0 && self.mark[id] != stamp {
                            freeable += b;
                        }
                    }
                }
                if !fits(self.resident_bytes - freeable) {
                    return None;
                }
            }
            for r in candidates {
                if fits(self.resident_bytes) {
                    break;
                }
                self.resident_model[r] = false;
                let mut freed = 0;
                for &(id, b) in &e.queries[r].entities {
                    self.refcount[id] -= 1;
                    if self.refcount[id] == 0 && self.mark[id] != stamp {
                        self.present[id] = false;
                        freed += b;
                    }
                }
                self.resident_bytes -= freed;
                self.event(at, TraceKind::Evict, r, freed, 0);
            }
            debug_assert!(fits(self.resident_bytes), "admission without a running model always fits");
        }
        for &(id, b) in &q.entities {
            if !self.present[id] {
                self.present[id] = true;
                self.resident_bytes += b;
            }
            self.refcount[id] += 1;
        }
        self.resident_model[next] = true;
        self.note_usage(running_delta);
        if missing == 0 {
            return Some(at);
        }
        let ready = at + q.load_us(missing);
        self.out.swaps += 1;
        self.out.bytes_swapped += missing;
        self.event(at, TraceKind::LoadStart, next, missing, 0);
        self.event(ready, TraceKind::LoadEnd, next, missing, 0);
        Some(ready)
    }

    /// Evicts other models, farthest next use first, until `cur` can run.
    fn make_room(&mut self, cur: usize, at: u64) {
        let e = self.e;
        let delta = self.delta(cur);
        let need = |resident: Bytes| e.reserve + resident + delta <= e.gpu_bytes;
        if need(self.resident_bytes) {
            return;
        }
        let n = e.order.len();
        let mut candidates: Vec<usize> = (0..e.queries.len())
            .filter(|&r| self.resident_model[r] && r != cur)
            .collect();
        candidates.sort_by_key(|&r| std::cmp::Reverse((self.pos[r] + n - self.pos[cur]) % n));
        for r in candidates {
            if need(self.resident_bytes) {
                break;
            }
            self.resident_model[r] = false;
            let mut freed = 0;
            for &(id, b) in &e.queries[r].entities {
                self.refcount[id] -= 1;
                if self.refcount[id] == 0 {
                    self.present[id] = false;
                    freed += b;
                }
            }
            self.resident_bytes -= freed;
            self.event(at, TraceKind::Evict, r, freed, 0);
        }
    }

    /// Drops expired frames and dequeues up to one batch at `t`.
    fn form_batch(&mut self, q: usize, t: u64) -> u64 {
        let spec = &self.e.queries[q];
        let total = self.totals[q];
        let tail = spec.arrived_by(t, total);
        let expired = if t >= spec.sla_us {
            spec.arrived_by(t - spec.sla_us, total)
        } else {
            0
        };
        let head = self.heads[q];
        if expired > head {
            if self.record {
                for k in head..expired {
                    let deadline = spec.arrival(k) + spec.sla_us;
                    self.event(deadline, TraceKind::Drop, q, 0, 1);
                }
            }
            self.out.skipped[q] += expired - head;
            self.heads[q] = expired;
        }
        let batch = spec.options[self.choice[q]].batch as u64;
        let k = (tail - self.heads[q]).min(batch);
        self.heads[q] += k;
        self.out.processed[q] += k;
        k
    }

    /// First arrival strictly after `t` across all queries.
    fn next_arrival(&self, t: u64) -> Option<u64> {
        self.e
            .queries
            .iter()
            .zip(&self.totals)
            .filter_map(|(q, &total)| {
                let k = q.arrived_by(t, total);
                (k < total).then(|| q.arrival(k))
            })
            .min()
    }

    fn finish(mut self) -> RawRun {
        for q in 0..self.e.queries.len() {
            let spec = &self.e.queries[q];
            let head = self.heads[q];
            let total = self.totals[q];
            if self.record {
                for k in head..total {
                    let deadline = spec.arrival(k) + spec.sla_us;
                    self.out.events.push(RawEvent {
                        time_us: deadline,
                        kind: TraceKind::Drop,
                        query: q,
                        bytes: 0,
                        frames: 1,
                    });
                }
            }
            self.out.skipped[q] += total - head;
            self.heads[q] = total;
        }
        self.out.events.sort();
        self.out
    }
}

impl Engine {
    /// Runs with `choice[q]` indexing into query q's batch options.
    pub fn run(&self, choice: &[usize], record: bool) -> RawRun {
        let mut run = Run::new(self, choice, record);
        let n = self.order.len();
        if n == 0 {
            return run.finish();
        }
        let mut gpu_free = 0;
        let mut ready = run.admit(self.order[0], 0, None).expect("empty GPU admits");
        let mut p = 0;
        let mut skips = 0;
        loop {
            let cur = self.order[p];
            let next = self.order[(p + 1) % n];
            let t_start = gpu_free.max(ready);
            if t_start >= self.duration_us {
                break;
            }
            run.out.blocked_us += ready.saturating_sub(gpu_free);
            run.out.turns += 1;
            let k = run.form_batch(cur, t_start);
            if k == 0 {
                run.out.skipped_turns += 1;
                run.event(t_start, TraceKind::Skip, cur, 0, 0);
                skips += 1;
                let mut t_end = t_start;
                if skips >= n {
                    skips = 0;
                    match run.next_arrival(t_start) {
                        Some(a) => t_end = a,
                        None => break,
                    }
                }
                gpu_free = t_end;
                ready = run.admit(next, t_end, None).expect("idle GPU admits");
            } else {
                skips = 0;
                let delta = run.delta(cur);
                let end = t_start + self.queries[cur].infer_us(choice[cur], k);
                run.make_room(cur, t_start);
                run.note_usage(delta);
                run.event(t_start, TraceKind::RunStart, cur, delta, k);
                run.event(end, TraceKind::RunEnd, cur, delta, k);
                ready = match run.admit(next, t_start, Some(cur)) {
                    Some(r) => r,
                    None => run.admit(next, end, None).expect("idle GPU admits"),
                };
                gpu_free = end;
            }
            p = (p + 1) % n;
        }
        run.finish()
    }
}
