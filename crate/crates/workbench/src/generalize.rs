//! Savings across incrementally grown workloads that vary chosen query knobs.

use std::collections::{BTreeMap, BTreeSet};

use gemel_core::catalog::{parse_catalog, Catalog, QuerySpec, WorkloadSpec};
use gemel_core::merging::{run_strategy, DifficultyModel, Gemel, MergeProblem, OracleSettings, SimulatedOracle};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Config, GeneralizationConfig};
use crate::error::BenchError;
use crate::experiment::with_target;
use crate::generate::quantile;
use crate::zoo;

pub const CAMERAS: [(&str, &str); 17] = [
    ("A0", "CityA Traffic"),
    ("A1", "CityA Traffic"),
    ("A2", "CityA Traffic"),
    ("A3", "CityA Traffic"),
    ("B0", "CityB Traffic"),
    ("B1", "CityB Traffic"),
    ("B2", "CityB Traffic"),
    ("B3", "CityB Traffic"),
    ("B4", "CityB Traffic"),
    ("B5", "CityB Traffic"),
    ("B6", "CityB Traffic"),
    ("Restaurant", "Restaurant"),
    ("Mall", "Mall"),
    ("Beach", "Beach"),
    ("Canal", "Canal"),
    ("Parking Lot", "Parking Lot"),
    ("Street", "Street"),
];

/// Objects that occur in each scene.
pub const SCENE_OBJECTS: [(&str, &[&str]); 8] = [
    ("CityA Traffic", &["Backpack", "Bus", "Car", "Person", "Traffic Light", "Truck"]),
    ("CityB Traffic", &["Bus", "Car", "Parking Meter", "Person", "Traffic Light", "Truck"]),
    ("Restaurant", &["Backpack", "Hat", "Person", "Shoe", "Wine Glass"]),
    ("Mall", &["Backpack", "Hat", "Person", "Shoe"]),
    ("Beach", &["Backpack", "Boat", "Hat", "Person", "Surfboard"]),
    ("Canal", &["Backpack", "Boat", "Hat", "Person"]),
    ("Parking Lot", &["Car", "Parking Meter", "Person", "Truck"]),
    ("Street", &["Backpack", "Car", "Hat", "Parking Meter", "Person", "Shoe", "Skateboard", "Traffic Light"]),
];

fn objects_in(scene: &str) -> &'static [&'static str] {
    SCENE_OBJECTS.iter().find(|(s, _)| *s == scene).map_or(&[], |(_, o)| o)
}

fn scene_of(camera: &str) -> &'static str {
    CAMERAS.iter().find(|(c, _)| *c == camera).map_or("", |(_, s)| s)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Knobs {
    model: String,
    camera: &'static str,
    object: &'static str,
}

/// Queries that change only the knobs in `vary` relative to `base`.
fn variations(base: &Knobs, vary: &BTreeSet<&str>, models: &[String]) -> Vec<Knobs> {
    let model_choices: Vec<&String> = if vary.contains("model") {
        models.iter().collect()
    } else {
        models.iter().filter(|m| **m == base.model).collect()
    };
    let base_scene = scene_of(base.camera);
    let cameras: Vec<&'static str> = CAMERAS
        .iter()
        .filter(|(c, s)| {
            if !vary.contains("camera") {
                *c == base.camera
            } else {
                vary.contains("scene") || *s == base_scene
            }
        })
        .map(|(c, _)| *c)
        .collect();
    let mut out = Vec::new();
    for m in &model_choices {
        for &camera in &cameras {
            let present = objects_in(scene_of(camera));
            // The original object if it is not varied, and only where it occurs.
            let objects: Vec<&'static str> = if vary.contains("object") {
                present.to_vec()
            } else {
                present.iter().copied().filter(|o| *o == base.object).collect()
            };
            for object in objects {
                out.push(Knobs { model: (*m).clone(), camera, object });
            }
        }
    }
    out
}

/// Grows one workload up to `max` queries; shorter when the knob values run out.
fn grow(vary: &BTreeSet<&str>, models: &[String], max: usize, rng: &mut ChaCha8Rng) -> Vec<Knobs> {
    let mut starts = Vec::new();
    for m in models {
        for (camera, scene) in CAMERAS {
            for &object in objects_in(scene) {
                starts.push(Knobs { model: m.clone(), camera, object });
            }
        }
    }
    let base = starts.choose(rng).expect("knob space is non-empty").clone();
    let mut picked = vec![base.clone()];
    let mut pool: Vec<Knobs> = variations(&base, vary, models).into_iter().filter(|k| *k != base).collect();
    while picked.len() < max && !pool.is_empty() {
        let i = rng.gen_range(0..pool.len());
        picked.push(pool.swap_remove(i));
    }
    picked
}

fn workload(id: String, knobs: &[Knobs], target: f64) -> WorkloadSpec {
    WorkloadSpec {
        workload_id: id,
        queries: knobs
            .iter()
            .enumerate()
            .map(|(i, k)| QuerySpec {
                query_id: format!("q{i:02}-{}", k.model),
                model_id: k.model.clone(),
                feed_id: k.camera.to_string(),
                objects: [k.object.to_string()].into(),
                accuracy_target: target,
                fps: 30.0,
                sla_ms: 100.0,
                scene: Some(scene_of(k.camera).to_string()),
            })
            .collect(),
        framework_reserve_bytes: 0,
    }
}

pub fn knob_label(set: &[String]) -> String {
    let letter = |k: &str| match k {
        "camera" => "C",
        "object" => "O",
        "model" => "M",
        _ => "S",
    };
    set.iter().map(|k| letter(k)).collect::<Vec<_>>().join("+")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationSample {
    pub knob_set: String,
    pub repetition: usize,
    pub size: usize,
    pub achieved_bytes: u64,
    pub optimal_bytes: u64,
}

impl GeneralizationSample {
    pub fn ratio(&self) -> f64 {
        self.achieved_bytes as f64 / self.optimal_bytes as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationRow {
    pub knob_set: String,
    pub size: usize,
    pub workloads: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

fn rep_seed(seed: u64, label: &str, rep: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    h.update((rep as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

pub fn generalization_catalog(gen: &GeneralizationConfig) -> Result<Catalog, BenchError> {
    match &gen.models {
        Some(p) => Ok(parse_catalog(p)?),
        None => Ok(zoo::generalization_corpus()),
    }
}

/// Runs the heuristic on every grown workload. Workloads without any
/// shareable layer are left out.
pub fn generalization_sweep(
    catalog: &Catalog,
    gen: &GeneralizationConfig,
    oracle: &OracleSettings,
    merge: &gemel_core::merging::MergeSettings,
    seed: u64,
) -> Result<Vec<GeneralizationSample>, BenchError> {
    let models: Vec<String> = catalog.models().map(|m| m.model_id.clone()).collect();
    let difficulty = DifficultyModel {
        diversity: gen.diversity.clone(),
        ..oracle.difficulty.clone()
    };
    let settings = with_target(merge, gen.accuracy_target);
    let mut jobs = Vec::new();
    for set in &gen.knob_sets {
        let label = knob_label(set);
        let vary: BTreeSet<&str> = set.iter().map(String::as_str).collect();
        for rep in 0..gen.repetitions {
            let s = rep_seed(seed, &label, rep);
            let knobs = grow(&vary, &models, gen.max_queries, &mut ChaCha8Rng::seed_from_u64(s));
            for size in gen.min_queries..=knobs.len() {
                jobs.push((label.clone(), rep, size, s, knobs[..size].to_vec()));
            }
        }
    }
    let results: Vec<Result<Option<GeneralizationSample>, BenchError>> = jobs
        .par_iter()
        .map(|(label, rep, size, s, knobs)| {
            let w = workload(format!("{label}-{rep}-{size}"), knobs, gen.accuracy_target);
            let problem = MergeProblem::new(&w, catalog)?;
            if problem.optimal_bytes() == 0 {
                return Ok(None);
            }
            let oracle = SimulatedOracle::new(difficulty.clone(), *s)?;
            let plan = run_strategy(&problem, &oracle, &Gemel, &settings, *s)?;
            Ok(Some(GeneralizationSample {
                knob_set: label.clone(),
                repetition: *rep,
                size: *size,
                achieved_bytes: plan.savings(),
                optimal_bytes: problem.optimal_bytes(),
            }))
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Median and quartiles of achieved/optimal per (knob set, size).
pub fn summarize(samples: &[GeneralizationSample]) -> Vec<GeneralizationRow> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for s in samples {
        if !order.contains(&s.knob_set) {
            order.push(s.knob_set.clone());
        }
        groups.entry((s.knob_set.clone(), s.size)).or_default().push(s.ratio());
    }
    let mut rows = Vec::new();
    for label in order {
        for ((l, size), v) in groups.iter_mut().filter(|((l, _), _)| *l == label) {
            v.sort_by(f64::total_cmp);
            rows.push(GeneralizationRow {
                knob_set: l.clone(),
                size: *size,
                workloads: v.len(),
                median: quantile(v, 0.5),
                p25: quantile(v, 0.25),
                p75: quantile(v, 0.75),
            });
        }
    }
    rows
}

pub fn rows_csv(rows: &[GeneralizationRow]) -> String {
    let mut s = String::from("knob_set,size,workloads,median,p25,p75\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{:.6},{:.6},{:.6}\n", r.knob_set, r.size, r.workloads, r.median, r.p25, r.p75));
    }
    s
}

pub fn samples_csv(samples: &[GeneralizationSample]) -> String {
    let mut s = String::from("knob_set,repetition,size,achieved_bytes,optimal_bytes,ratio\n");
    for x in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{:.6}\n",
            x.knob_set,
            x.repetition,
            x.size,
            x.achieved_bytes,
            x.optimal_bytes,
            x.ratio()
        ));
    }
    s
}

pub fn run(cfg: &Config) -> Result<Vec<GeneralizationSample>, BenchError> {
    let catalog = generalization_catalog(&cfg.generalization)?;
    generalization_sweep(&catalog, &cfg.generalization, &cfg.oracle, &cfg.merge, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(k: &[&'static str]) -> BTreeSet<&'static str> {
        k.iter().copied().collect()
    }

    #[test]
    fn every_object_occurs_in_some_scene() {
        let objects: BTreeSet<&str> = SCENE_OBJECTS.iter().flat_map(|(_, o)| o.iter().copied()).collect();
        assert_eq!(objects.len(), 13);
        assert!(CAMERAS.iter().all(|(_, s)| !objects_in(s).is_empty()));
    }

    #[test]
    fn grown_workloads_vary_only_target_knobs() {
        let models: Vec<String> = zoo::GENERALIZATION_MODELS.iter().map(|m| m.to_string()).collect();
        let vary = set(&["camera", "object"]);
        for seed in 0..20 {
            let k = grow(&vary, &models, 5, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(k.iter().all(|q| q.model == k[0].model));
            assert!(k.iter().all(|q| scene_of(q.camera) == scene_of(k[0].camera)));
            assert!(k.iter().all(|q| objects_in(scene_of(q.camera)).contains(&q.object)));
            let distinct: BTreeSet<_> = k.iter().collect();
            assert_eq!(distinct.len(), k.len());
        }
    }

    #[test]
    fn scene_knob_lets_cameras_leave_the_scene() {
        let models = vec!["r18".to_string()];
        let base = Knobs { model: "r18".into(), camera: "Beach", object: "Person" };
        assert!(variations(&base, &set(&["camera"]), &models).len() == 1);
        assert!(variations(&base, &set(&["camera", "scene"]), &models).len() > 1);
    }

    #[test]
    fn single_repetition_is_reproducible() {
        let gen = GeneralizationConfig { repetitions: 1, ..GeneralizationConfig::default() };
        let catalog = zoo::generalization_corpus();
        let a = generalization_sweep(&catalog, &gen, &Default::default(), &Default::default(), 4).unwrap();
        let b = generalization_sweep(&catalog, &gen, &Default::default(), &Default::default(), 4).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.achieved_bytes <= s.optimal_bytes && s.optimal_bytes > 0));
    }
}
