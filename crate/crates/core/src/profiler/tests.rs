use std::collections::BTreeSet;

use gemel_testkit::{best_batches_exhaustive, TickInstance, TickOption, TickQuery};
use proptest::prelude::*;

use super::*;
use crate::catalog::QuerySpec;
use crate::matching::enumerate_groups;
use crate::merging::SharedSet;
use crate::testutil::{model, query, workload};
use crate::simulator::simulate;

fn shared_pair() -> (Catalog, WorkloadSpec, MergeConfig) {
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
    (catalog, w, merged)
}

#[test]
fn load_cost_scales_with_missing_bytes() {
    let (catalog, _, merged) = shared_pair();
    let a = catalog.get("a").unwrap();
    let none = BTreeSet::new();
    let full = load_cost(a, "q00-a", &none, &merged);
    assert_eq!(full.bytes, 50);
    assert!((full.ms - 50.0).abs() < 1e-12);

    let all: BTreeSet<WeightKey> = (0..2).map(|p| WeightKey::of("q00-a", p, &merged)).collect();
    assert_eq!(load_cost(a, "q00-a", &all, &merged), LoadCost { bytes: 0, ms: 0.0 });

    // b's copy of the shared layer is the same weight.
    let via_b: BTreeSet<WeightKey> = [WeightKey::of("q01-b", 0, &merged)].into();
    let part = load_cost(a, "q00-a", &via_b, &merged);
    assert_eq!(part.bytes, 10);
    assert!((part.ms - 10.0).abs() < 1e-12);
    let unmerged = load_cost(a, "q00-a", &via_b, &MergeConfig::default());
    assert_eq!(unmerged.bytes, 50);
}

#[test]
fn half_resident_costs_half_the_load_time() {
    let catalog = Catalog::from_models(vec![model("m", &[("x", 30), ("y", 30)], 80.0, &[(1, 0, 5.0)])]).unwrap();
    let m = catalog.get("m").unwrap();
    let none = MergeConfig::default();
    let resident: BTreeSet<WeightKey> = [WeightKey::of("q00-m", 1, &none)].into();
    let c = load_cost(m, "q00-m", &resident, &none);
    assert_eq!(c.bytes, 30);
    assert!((c.ms - 40.0).abs() < 1e-12);
}

#[test]
fn single_batch_profile_is_chosen() {
    let (catalog, w, _) = shared_pair();
    let plan = select_batches(&w, &catalog, 100, None, &ProfileOptions::default()).unwrap();
    assert!(plan.feasible);
    assert!(plan.batches.values().all(|&b| b == 1));
}

#[test]
fn below_minimum_is_rejected() {
    let (catalog, w, _) = shared_pair();
    let err = select_batches(&w, &catalog, 49, None, &ProfileOptions::default()).unwrap_err();
    assert_eq!(err, ProfileError::BelowMinimum { gpu_bytes: 49, min: 50 });
}

#[test]
fn slow_model_is_flagged_infeasible() {
    let catalog = Catalog::from_models(vec![model("slow", &[("x", 10)], 5.0, &[(1, 0, 150.0), (2, 1, 160.0)])]).unwrap();
    let w = workload(vec![query(0, "slow", 10.0, 100.0)], 0);
    let plan = select_batches(&w, &catalog, 100, None, &ProfileOptions::default()).unwrap();
    assert!(!plan.feasible);
    assert_eq!(plan.infeasible_queries, vec!["q00-slow".to_string()]);
    assert_eq!(plan.batches["q00-slow"], 1);
}

#[test]
fn larger_batch_wins_when_frames_outpace_inference() {
    // At 50 fps neither batch 1 (30 ms) nor batch 2 (45 ms) keeps up; batch 4 (50 ms) does.
    let catalog = Catalog::from_models(vec![model("m", &[("x", 10)], 5.0, &[(1, 1, 30.0), (2, 2, 45.0), (4, 3, 50.0)])])
        .unwrap();
    let w = workload(vec![query(0, "m", 50.0, 100.0)], 0);
    let plan = select_batches(&w, &catalog, 100, None, &ProfileOptions::default()).unwrap();
    assert_eq!(plan.batches["q00-m"], 4);
    assert!(plan.exhaustive);
}

#[test]
fn reported_throughput_is_reproduced_by_the_simulator() {
    let catalog = Catalog::from_models(vec![
        model("a", &[("a0", 40)], 40.0, &[(1, 2, 12.0), (2, 4, 15.0), (4, 8, 22.0)]),
        model("b", &[("b0", 30)], 30.0, &[(1, 2, 8.0), (2, 3, 11.0)]),
    ])
    .unwrap();
    let w = workload(vec![query(0, "a", 30.0, 100.0), query(1, "b", 30.0, 100.0)], 5);
    let plan = select_batches(&w, &catalog, 60, None, &ProfileOptions::default()).unwrap();
    let cfg = SimConfig {
        gpu_bytes: 60,
        duration_s: 60.0,
        batch_plan: plan.batches.clone(),
        ..SimConfig::default()
    };
    let r = simulate(&cfg, &w, &catalog).unwrap();
    let min = r.queries.iter().map(|q| q.processed).min().unwrap() as f64;
    assert!((min - plan.min_throughput * 60.0).abs() <= 1.0);
}

#[test]
fn steady_state_cycle_covers_one_turn_per_query() {
    let (catalog, w, merged) = shared_pair();
    let opts = ProfileOptions::default();
    let plan = select_batches(&w, &catalog, 60, Some(&merged), &opts).unwrap();
    let cycle = steady_state_cycle(&w, &catalog, &plan, Some(&merged), &opts).unwrap();
    let turns = cycle
        .iter()
        .filter(|e| matches!(e.event_type, TraceKind::RunStart | TraceKind::Skip))
        .count();
    assert_eq!(turns, 2);
}

const PERIODS: [u64; 7] = [20, 25, 40, 50, 100, 125, 200];

/// (bytes, period index, sla, [(infer, delta)] for batches 1, 2, 4).
type ToyQuery = (u64, usize, u64, Vec<(u64, u64)>);

fn toy_query() -> impl Strategy<Value = ToyQuery> {
    (
        5u64..40,
        0usize..PERIODS.len(),
        30u64..150,
        prop::collection::vec((1u64..25, 0u64..6), 1..=3),
    )
        .prop_map(|(bytes, period, sla, steps)| {
            let mut infer = 0;
            let mut delta = 0;
            let options = steps
                .into_iter()
                .map(|(di, dd)| {
                    infer += di;
                    delta += dd;
                    (infer, delta)
                })
                .collect();
            (bytes, period, sla, options)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plan_matches_exhaustive_tick_enumeration(
        toys in prop::collection::vec(toy_query(), 1..=3),
        reserve in 0u64..5,
        slack in 0u64..60,
        duration_ms in 200u64..800,
    ) {
        let batches = [1u32, 2, 4];
        let models: Vec<ModelDescriptor> = toys
            .iter()
            .enumerate()
            .map(|(i, (bytes, _, _, opts))| {
                let runs: Vec<(u32, Bytes, f64)> =
                    opts.iter().enumerate().map(|(k, &(inf, d))| (batches[k], d, inf as f64)).collect();
                model(&format!("m{i}"), &[(&format!("x{i}"), *bytes)], *bytes as f64, &runs)
            })
            .collect();
        let catalog = Catalog::from_models(models).unwrap();
        let queries: Vec<QuerySpec> = toys
            .iter()
            .enumerate()
            .map(|(i, (_, p, sla, _))| query(i, &format!("m{i}"), 1000.0 / PERIODS[*p] as f64, *sla as f64))
            .collect();
        let w = workload(queries, reserve);
        let need = toys.iter().map(|t| t.0 + t.3[0].1).max().unwrap();
        let gpu = reserve + need + slack;
        let opts = ProfileOptions {
            eval_horizon_s: duration_ms as f64 / 1000.0,
            ..ProfileOptions::default()
        };
        let plan = select_batches(&w, &catalog, gpu, None, &opts).unwrap();

        let inst = TickInstance {
            queries: toys
                .iter()
                .enumerate()
                .map(|(i, (bytes, p, sla, o))| TickQuery {
                    entities: vec![(i, *bytes)],
                    options: o
                        .iter()
                        .enumerate()
                        .map(|(k, &(inf, d))| TickOption { batch: batches[k] as u64, infer_ms: inf, delta: d })
                        .collect(),
                    choice: 0,
                    period_ms: PERIODS[*p],
                    phase_ms: 0,
                    sla_ms: *sla,
                })
                .collect(),
            order: (0..toys.len()).collect(),
            gpu,
            reserve,
            duration_ms,
        };
        let run_memory: Vec<Vec<u64>> = toys.iter().map(|t| t.3.iter().map(|o| t.0 + o.1).collect()).collect();
        let expected = best_batches_exhaustive(&inst, &run_memory);
        let got: Vec<usize> = plan
            .batches
            .values()
            .zip(&toys)
            .map(|(b, t)| batches[..t.3.len()].iter().position(|x| x == b).unwrap())
            .collect();
        prop_assert_eq!(got, expected);
    }
}
