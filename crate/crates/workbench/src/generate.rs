//! Candidate workload enumeration and potential-savings classes.

use std::collections::{BTreeMap, BTreeSet};

use gemel_core::catalog::{Catalog, QuerySpec, WorkloadDefaults, WorkloadSpec};
use gemel_core::matching::{optimal_savings_of_profiles, signature_profile};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::GenerateConfig;
use crate::corpus::{LabeledWorkload, WorkloadClass};
use crate::error::BenchError;

/// A multiset of catalog models, as sorted indices into `Catalog::models()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub models: Vec<usize>,
    pub savings_fraction: f64,
}

fn multiset_count(n: usize, k: usize) -> f64 {
    // C(n + k - 1, k)
    (1..=k).fold(1.0, |acc, i| acc * (n + i - 1) as f64 / i as f64)
}

fn enumerate(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for m in start..n {
        cur.push(m);
        enumerate(n, k, m, cur, out);
        cur.pop();
    }
}

/// Every multiset of sizes `min..=max`, or a seeded uniform sample of `cap`
/// distinct ones when there are more than `cap`.
pub fn candidate_sets(n: usize, min: usize, max: usize, cap: usize, seed: u64) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let counts: Vec<f64> = (min..=max).map(|k| multiset_count(n, k)).collect();
    let total: f64 = counts.iter().sum();
    if total <= cap as f64 {
        let mut out = Vec::new();
        for k in min..=max {
            enumerate(n, k, 0, &mut Vec::new(), &mut out);
        }
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < cap && attempts < cap.saturating_mul(8) {
        attempts += 1;
        let mut u = rng.gen::<f64>() * total;
        let mut k = max;
        for (i, c) in counts.iter().enumerate() {
            if u < *c {
                k = min + i;
                break;
            }
            u -= c;
        }
        // Stars and bars: k distinct slots out of n + k - 1 map to one multiset.
        let mut slots = sample(&mut rng, n + k - 1, k).into_vec();
        slots.sort_unstable();
        let set: Vec<usize> = slots.iter().enumerate().map(|(i, s)| s - i).collect();
        if seen.insert(set.clone()) {
            out.push(set);
        }
    }
    out
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Upper quartile and above is HP, lower quartile and below is LP, the rest MP.
pub fn classify(fractions: &[f64]) -> Vec<WorkloadClass> {
    let mut sorted = fractions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    fractions
        .iter()
        .map(|&f| {
            if f >= q3 {
                WorkloadClass::High
            } else if f <= q1 {
                WorkloadClass::Low
            } else {
                WorkloadClass::Mid
            }
        })
        .collect()
}

pub fn score_candidates(catalog: &Catalog, sets: Vec<Vec<usize>>) -> Vec<Candidate> {
    let profiles: Vec<_> = catalog.models().map(signature_profile).collect();
    sets.into_iter()
        .map(|models| {
            let ps: Vec<_> = models.iter().map(|&m| &profiles[m]).collect();
            Candidate {
                savings_fraction: optimal_savings_of_profiles(&ps).fraction,
                models,
            }
        })
        .collect()
}

fn build(catalog: &Catalog, id: String, models: &[usize], defaults: &WorkloadDefaults) -> WorkloadSpec {
    let ids: Vec<&str> = catalog.models().map(|m| m.model_id.as_str()).collect();
    let queries = models
        .iter()
        .enumerate()
        .map(|(i, &m)| QuerySpec {
            query_id: format!("q{i:02}-{}", ids[m]),
            model_id: ids[m].to_string(),
            feed_id: format!("F{}", i + 1),
            objects: ["car".to_string()].into(),
            accuracy_target: defaults.accuracy_target,
            fps: defaults.fps,
            sla_ms: defaults.sla_ms,
            scene: None,
        })
        .collect();
    WorkloadSpec {
        workload_id: id,
        queries,
        framework_reserve_bytes: defaults.framework_reserve_bytes,
    }
}

/// Generates labeled workloads: scores every candidate by its optimal savings
/// fraction, splits by quartile and samples the configured count per class.
pub fn generate_workloads(
    catalog: &Catalog,
    gen_cfg: &GenerateConfig,
    defaults: &WorkloadDefaults,
    seed: u64,
) -> Result<Vec<LabeledWorkload>, BenchError> {
    if catalog.is_empty() {
        return Err(BenchError::NoCandidates("empty catalog".into()));
    }
    let sets = candidate_sets(catalog.len(), gen_cfg.min_queries, gen_cfg.max_queries, gen_cfg.candidate_cap, seed);
    let mut scored = score_candidates(catalog, sets);
    if gen_cfg.exclude_zero_savings {
        scored.retain(|c| c.savings_fraction > 0.0);
    }
    if scored.is_empty() {
        return Err(BenchError::NoCandidates("every candidate was excluded".into()));
    }
    let fractions: Vec<f64> = scored.iter().map(|c| c.savings_fraction).collect();
    let classes = classify(&fractions);
    let mut by_class: BTreeMap<WorkloadClass, Vec<usize>> = BTreeMap::new();
    for (i, c) in classes.iter().enumerate() {
        by_class.entry(*c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::new();
    for (class, want) in [
        (WorkloadClass::Low, gen_cfg.lp),
        (WorkloadClass::Mid, gen_cfg.mp),
        (WorkloadClass::High, gen_cfg.hp),
    ] {
        let pool = by_class.get(&class).map(Vec::as_slice).unwrap_or(&[]);
        let mut picked: Vec<usize> = pool.choose_multiple(&mut rng, want.min(pool.len())).copied().collect();
        picked.sort_unstable();
        for (n, i) in picked.into_iter().enumerate() {
            out.push(LabeledWorkload {
                class: Some(class),
                workload: build(catalog, format!("{}{}", class.label(), n + 1), &scored[i].models, defaults),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gemel_core::matching::optimal_savings;
    use proptest::prelude::*;

    use crate::zoo;

    fn gen_cfg(min: usize, max: usize) -> GenerateConfig {
        GenerateConfig {
            min_queries: min,
            max_queries: max,
            exclude_zero_savings: false,
            ..GenerateConfig::default()
        }
    }

    fn pair_catalog(ids: &[&str]) -> Catalog {
        Catalog::from_models(ids.iter().map(|id| zoo::entry(id).unwrap().descriptor()).collect()).unwrap()
    }

    #[test]
    fn small_spaces_are_enumerated_exactly() {
        let sets = candidate_sets(3, 2, 2, 100, 0);
        assert_eq!(sets, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]);
    }

    #[test]
    fn large_spaces_are_sampled_to_the_cap() {
        let sets = candidate_sets(21, 2, 50, 500, 3);
        assert_eq!(sets.len(), 500);
        assert!(sets.iter().all(|s| (2..=50).contains(&s.len()) && s.windows(2).all(|w| w[0] <= w[1])));
        assert_eq!(sets, candidate_sets(21, 2, 50, 500, 3));
    }

    #[test]
    fn single_model_catalog_is_all_high() {
        let catalog = pair_catalog(&["r18"]);
        let out = generate_workloads(&catalog, &gen_cfg(2, 2), &WorkloadDefaults::default(), 0).unwrap();
        assert!(!out.is_empty());
        assert!(out.iter().all(|w| w.class == Some(WorkloadClass::High)));
    }

    #[test]
    fn disjoint_pair_is_low() {
        // SqueezeNet and Tiny YOLOv3 share no architecture.
        let catalog = pair_catalog(&["squeezenet", "tiny-yolo"]);
        let sets = candidate_sets(2, 2, 2, 10, 0);
        let scored = score_candidates(&catalog, sets);
        let classes = classify(&scored.iter().map(|c| c.savings_fraction).collect::<Vec<_>>());
        assert_eq!(scored[1].models, vec![0, 1]);
        assert_eq!(scored[1].savings_fraction, 0.0);
        assert_eq!(classes[1], WorkloadClass::Low);
    }

    #[test]
    fn pair_fractions_match_matching_module() {
        let catalog = zoo::corpus();
        let scored = score_candidates(&catalog, candidate_sets(catalog.len(), 2, 2, 1000, 0));
        let ids: Vec<String> = catalog.models().map(|m| m.model_id.clone()).collect();
        for c in scored {
            let w = build(&catalog, "w".into(), &c.models, &WorkloadDefaults::default());
            let expect = optimal_savings(&w, &catalog).unwrap().fraction;
            assert!((c.savings_fraction - expect).abs() < 1e-12, "{:?}", c.models.iter().map(|&m| &ids[m]).collect::<Vec<_>>());
        }
    }

    #[test]
    fn class_counts_follow_spec() {
        let catalog = zoo::corpus();
        let mut s = gen_cfg(2, 4);
        s.exclude_zero_savings = true;
        let out = generate_workloads(&catalog, &s, &WorkloadDefaults::default(), 5).unwrap();
        let count = |c| out.iter().filter(|w| w.class == Some(c)).count();
        assert_eq!((count(WorkloadClass::Low), count(WorkloadClass::Mid), count(WorkloadClass::High)), (3, 6, 6));
        assert_eq!(out[0].workload.workload_id, "LP1");
    }

    #[test]
    fn empty_catalog_is_an_error() {
        let err = generate_workloads(&Catalog::default(), &gen_cfg(2, 2), &WorkloadDefaults::default(), 0).unwrap_err();
        assert!(matches!(err, BenchError::NoCandidates(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scores_ignore_query_order(set in prop::collection::vec(0usize..21, 2..8), seed in any::<u64>()) {
            let catalog = zoo::corpus();
            let mut shuffled = set.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = score_candidates(&catalog, vec![set]);
            let b = score_candidates(&catalog, vec![shuffled]);
            prop_assert_eq!(a[0].savings_fraction, b[0].savings_fraction);
        }

        #[test]
        fn classification_is_permutation_stable(fr in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
            let mut idx: Vec<usize> = (0..fr.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<f64> = idx.iter().map(|&i| fr[i]).collect();
            let base = classify(&fr);
            let other = classify(&permuted);
            for (j, &i) in idx.iter().enumerate() {
                prop_assert_eq!(base[i], other[j]);
            }
        }
    }
}
