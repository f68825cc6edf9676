
use gemel_testkit::{tick_simulate, TickEvent, TickInstance, TickKind, TickOption, TickQuery};
use proptest::prelude::*;

use super::*;
use crate::matching::enumerate_groups;
use crate::merging::SharedSet;
use crate::testutil::{model, query, workload};

fn two_model_toy() -> (Catalog, WorkloadSpec) {
    let catalog = Catalog::from_models(vec![
        model("a", &[("a0", 50)], 50.0, &[(1, 0, 20.0)]),
        model("b", &[("b0", 50)], 50.0, &[(1, 0, 20.0)]),
    ])
    .unwrap();
    let w = workload(vec![query(0, "a", 10.0, 100.0), query(1, "b", 10.0, 100.0)], 0);
    (catalog, w)
}

fn cfg(gpu: Bytes, duration_s: f64) -> SimConfig {
    SimConfig {
        gpu_bytes: gpu,
        duration_s,
        record_trace: true,
        ..SimConfig::default()
    }
}

#[test]
fn single_fitting_query_processes_everything() {
    let catalog = Catalog::from_models(vec![model("a", &[("a0", 100)], 5.0, &[(1, 10, 5.0)])]).unwrap();
    let w = workload(vec![query(0, "a", 30.0, 100.0)], 50);
    let r = simulate(&cfg(1000, 10.0), &w, &catalog).unwrap();
    assert_eq!(r.queries[0].frames_arrived, 300);
    assert_eq!(r.skipped(), 0);
    assert!((r.workload_accuracy - 0.9).abs() < 1e-12);
    assert_eq!(r.swap_count, 1);
}

#[test]
fn two_query_swap_matches_hand_trace() {
    let (catalog, w) = two_model_toy();
    let r = simulate(&cfg(50, 0.3), &w, &catalog).unwrap();
    let a = "q00-a";
    let b = "q01-b";
    use TraceKind::*;
    let expected: Vec<(u64, TraceKind, &str, Bytes, u64)> = vec![
        (0, LoadStart, a, 50, 0),
        (50, LoadEnd, a, 50, 0),
        (50, RunStart, a, 0, 1),
        (70, RunEnd, a, 0, 1),
        (70, Evict, a, 50, 0),
        (70, LoadStart, b, 50, 0),
        (100, Drop, b, 0, 1),
        (120, LoadEnd, b, 50, 0),
        (120, RunStart, b, 0, 1),
        (140, RunEnd, b, 0, 1),
        (140, Evict, b, 50, 0),
        (140, LoadStart, a, 50, 0),
        (190, LoadEnd, a, 50, 0),
        (190, RunStart, a, 0, 1),
        (210, RunEnd, a, 0, 1),
        (210, Evict, a, 50, 0),
        (210, LoadStart, b, 50, 0),
        (260, LoadEnd, b, 50, 0),
        (260, RunStart, b, 0, 1),
        (280, RunEnd, b, 0, 1),
        (280, Evict, b, 50, 0),
        (280, LoadStart, a, 50, 0),
        (300, Drop, a, 0, 1),
        (330, LoadEnd, a, 50, 0),
    ];
    let got: Vec<(u64, TraceKind, &str, Bytes, u64)> = r
        .trace
        .as_ref()
        .unwrap()
        .iter()
        .map(|e| (e.time_us / 1000, e.event_type, e.query_id.as_str(), e.bytes, e.frames))
        .collect();
    assert_eq!(got, expected);
    assert_eq!(r.processed(), 4);
    assert_eq!(r.skipped(), 2);
    // Blocked: 0-50, 70-120, 140-190, 210-260.
    assert!((r.time_blocked_loading_ms - 200.0).abs() < 1e-9);
    assert_eq!(r.swap_count, 5);
}

#[test]
fn prefetch_hides_load_when_both_fit() {
    let (catalog, w) = two_model_toy();
    let r = simulate(&cfg(100, 1.0), &w, &catalog).unwrap();
    assert_eq!(r.swap_count, 2);
    // b's first frame expires at 100 ms, the moment its weights land.
    assert_eq!(r.skipped(), 1);
    assert!((r.time_blocked_loading_ms - 80.0).abs() < 1e-9);
}

#[test]
fn shared_layer_is_loaded_once() {
    let catalog = Catalog::from_models(vec![
        model("a", &[("s", 40), ("a1", 10)], 50.0, &[(1, 0, 10.0)]),
        model("b", &[("s", 40), ("b1", 10)], 50.0, &[(1, 0, 10.0)]),
    ])
    .unwrap();
    let w = workload(vec![query(0, "a", 10.0, 100.0), query(1, "b", 10.0, 100.0)], 0);
    let mut merged = MergeConfig::default();
    for g in enumerate_groups(&w, &catalog).unwrap() {
        merged.upsert(SharedSet::from_group(&g));
    }
    let mut c = cfg(60, 2.0);
    let base = simulate(&c, &w, &catalog).unwrap();
    c.merge_config = merged;
    let with = simulate(&c, &w, &catalog).unwrap();
    assert_eq!(with.bytes_swapped, 60);
    assert!(with.high_water_bytes <= 60);
    assert!(base.bytes_swapped > with.bytes_swapped);
    assert!(with.skipped() <= base.skipped());
    let delta = compare_runs(&base, &with).unwrap();
    assert!(delta.blocked_reduction > 0.0);
}

#[test]
fn merge_adjacent_places_sharing_models_together() {
    let catalog = Catalog::from_models(vec![
        model("a", &[("s", 40), ("a1", 10)], 50.0, &[(1, 0, 10.0)]),
        model("c", &[("c0", 50)], 50.0, &[(1, 0, 10.0)]),
        model("b", &[("s", 40), ("b1", 10)], 50.0, &[(1, 0, 10.0)]),
    ])
    .unwrap();
    let w = workload(
        vec![query(0, "a", 10.0, 100.0), query(1, "c", 10.0, 100.0), query(2, "b", 10.0, 100.0)],
        0,
    );
    let mut merged = MergeConfig::default();
    for g in enumerate_groups(&w, &catalog).unwrap() {
        merged.upsert(SharedSet::from_group(&g));
    }
    let mut c = cfg(200, 1.0);
    c.merge_config = merged;
    c.order_policy = "merge_adjacent".into();
    let r = simulate(&c, &w, &catalog).unwrap();
    assert_eq!(r.order, vec!["q00-a", "q02-b", "q01-c"]);
    c.order_policy = "round_robin".into();
    assert_eq!(simulate(&c, &w, &catalog).unwrap().order, vec!["q00-a", "q01-c", "q02-b"]);
}

#[test]
fn identical_runs_compare_to_zero() {
    let (catalog, w) = two_model_toy();
    let r = simulate(&cfg(50, 1.0), &w, &catalog).unwrap();
    let d = compare_runs(&r, &r.clone()).unwrap();
    assert_eq!(d.processed_delta, 0);
    assert_eq!(d.skipped_delta, 0);
    assert_eq!(d.accuracy_delta, 0.0);
    assert_eq!(d.blocked_reduction, 0.0);
    let other = simulate(&cfg(100, 1.0), &w, &catalog).unwrap();
    assert!(matches!(compare_runs(&r, &other), Err(SimError::Mismatch(_))));
}

#[test]
fn too_little_memory_is_rejected() {
    let (catalog, w) = two_model_toy();
    let err = simulate(&cfg(49, 1.0), &w, &catalog).unwrap_err();
    assert!(matches!(err, SimError::InsufficientMemory { required: 50, .. }));
}

#[test]
fn unknown_order_and_bad_duration_are_rejected() {
    let (catalog, w) = two_model_toy();
    let mut c = cfg(100, 1.0);
    c.order_policy = "zigzag".into();
    assert!(matches!(simulate(&c, &w, &catalog), Err(SimError::UnknownOrder(_))));
    let c = cfg(100, 0.0);
    assert!(matches!(simulate(&c, &w, &catalog), Err(SimError::Config(_))));
}

#[test]
fn identical_configs_give_identical_reports() {
    let (catalog, w) = two_model_toy();
    let a = simulate(&cfg(50, 5.0), &w, &catalog).unwrap().to_json();
    let b = simulate(&cfg(50, 5.0), &w, &catalog).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn trace_csv_has_expected_columns() {
    let (catalog, w) = two_model_toy();
    let r = simulate(&cfg(50, 0.3), &w, &catalog).unwrap();
    let csv = r.trace_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time_ms,event_type,query_id,bytes"));
    assert_eq!(lines.next(), Some("0.000,load_start,q00-a,50"));
}

#[test]
fn feed_overrides_set_rate_and_phase() {
    let (catalog, w) = two_model_toy();
    let mut c = cfg(100, 1.0);
    c.feeds.insert("feed0".into(), FeedSpec { fps: 5.0, phase_ms: 30.0 });
    let r = simulate(&c, &w, &catalog).unwrap();
    assert_eq!(r.queries[0].frames_arrived, 5);
    assert_eq!(r.queries[1].frames_arrived, 10);
}

fn engine_of(inst: &TickInstance) -> Engine {
    let queries = inst
        .queries
        .iter()
        .map(|q| {
            let params: Bytes = q.entities.iter().map(|e| e.1).sum();
            EngineQuery {
                entities: q.entities.clone(),
                param_bytes: params,
                load_time_us: params as f64 * 1000.0,
                options: q
                    .options
                    .iter()
                    .map(|o| BatchOption {
                        batch: o.batch as u32,
                        run_memory: params + o.delta,
                        delta: o.delta,
                        infer_us: o.infer_ms * 1000,
                    })
                    .collect(),
                fps: 1000.0 / q.period_ms as f64,
                phase_us: q.phase_ms * 1000,
                sla_us: q.sla_ms * 1000,
            }
        })
        .collect();
    Engine {
        queries,
        entity_count: inst.queries.iter().flat_map(|q| q.entities.iter().map(|e| e.0 + 1)).max().unwrap_or(0),
        order: inst.order.clone(),
        gpu_bytes: inst.gpu,
        reserve: inst.reserve,
        duration_us: inst.duration_ms * 1000,
    }
}

fn tick_kind(k: TraceKind) -> TickKind {
    match k {
        TraceKind::LoadEnd => TickKind::LoadEnd,
        TraceKind::RunEnd => TickKind::RunEnd,
        TraceKind::Drop => TickKind::Drop,
        TraceKind::Evict => TickKind::Evict,
        TraceKind::LoadStart => TickKind::LoadStart,
        TraceKind::RunStart => TickKind::RunStart,
        TraceKind::Skip => TickKind::Skip,
    }
}

const PERIODS: [u64; 7] = [20, 25, 40, 50, 100, 125, 200];

prop_compose! {
    fn tick_query(shared: Option<u64>, own_id: usize)(
        own in 1u64..40,
        infer in 1u64..30,
        infer2 in 0u64..20,
        delta in 0u64..8,
        two in any::<bool>(),
        period in 0usize..PERIODS.len(),
        phase in 0u64..60,
        sla in 20u64..160,
    ) -> TickQuery {
        let mut entities = Vec::new();
        if let Some(b) = shared {
            entities.push((0, b));
        }
        entities.push((own_id, own));
        let mut options = vec![TickOption { batch: 1, infer_ms: infer, delta }];
        if two {
            options.push(TickOption { batch: 2, infer_ms: infer + infer2, delta: delta + 2 });
        }
        TickQuery {
            entities,
            choice: options.len() - 1,
            options,
            period_ms: PERIODS[period],
            phase_ms: phase,
            sla_ms: sla,
        }
    }
}

fn tick_instance() -> impl Strategy<Value = TickInstance> {
    (1usize..=2, proptest::option::of(1u64..30), 0u64..5, 60u64..320, 0u64..60)
        .prop_flat_map(|(n, shared, reserve, duration, slack)| {
            let qs: Vec<_> = (0..n).map(|i| tick_query(shared, i + 1)).collect();
            (qs, Just(reserve), Just(duration), Just(slack))
        })
        .prop_map(|(queries, reserve, duration, slack)| {
            let need = queries
                .iter()
                .map(|q| q.entities.iter().map(|e| e.1).sum::<u64>() + q.options.last().unwrap().delta)
                .max()
                .unwrap();
            let order = (0..queries.len()).collect();
            TickInstance {
                queries,
                order,
                gpu: reserve + need + slack,
                reserve,
                duration_ms: duration,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn engine_trace_equals_tick_reference(inst in tick_instance()) {
        let engine = engine_of(&inst);
        let choice: Vec<usize> = inst.queries.iter().map(|q| q.choice).collect();
        let raw = engine.run(&choice, true);
        let reference = tick_simulate(&inst);
        let got: Vec<TickEvent> = raw
            .events
            .iter()
            .map(|e| TickEvent {
                time_ms: e.time_us / 1000,
                kind: tick_kind(e.kind),
                query: e.query,
                bytes: e.bytes,
                frames: e.frames,
            })
            .collect();
        prop_assert!(raw.events.iter().all(|e| e.time_us % 1000 == 0));
        prop_assert_eq!(got, reference.events);
        prop_assert_eq!(raw.processed, reference.processed);
        prop_assert_eq!(raw.arrived, reference.arrived);
    }

    #[test]
    fn runs_conserve_frames_and_respect_memory(inst in tick_instance()) {
        let engine = engine_of(&inst);
        let choice: Vec<usize> = inst.queries.iter().map(|q| q.choice).collect();
        let raw = engine.run(&choice, false);
        for q in 0..inst.queries.len() {
            prop_assert_eq!(raw.processed[q] + raw.skipped[q], raw.arrived[q]);
        }
        prop_assert!(raw.high_water <= inst.gpu);
        prop_assert!(raw.blocked_us <= engine.duration_us);
        let with_trace = engine.run(&choice, true);
        prop_assert_eq!(with_trace.processed, raw.processed);
    }
}
