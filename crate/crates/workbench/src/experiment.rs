//! Experiment orchestration: merge plans per workload, edge cells per memory
//! level, and the output bundle.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use gemel_core::catalog::{memory_settings, Bytes, Catalog, MemoryLevel, WorkloadSpec};
use gemel_core::merging::{
    optimal_plan, run_strategy, MergeConfig, MergePlan, MergeProblem, MergeSettings, OracleRegistry,
    RetrainingOracle, StrategyRegistry,
};
use gemel_core::profiler::{select_batches, ProfileOptions};
use gemel_core::simulator::{simulate, SimConfig, SimReport};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::corpus::{LabeledWorkload, WorkloadClass};
use crate::error::BenchError;
use crate::mainstream::{self, MainstreamPlan};

pub const UNMERGED: &str = "unmerged";

/// Every merge plan computed for one workload.
#[derive(Debug, Clone, Serialize)]
pub struct WorkloadPlans {
    pub workload_id: String,
    pub class: Option<WorkloadClass>,
    pub param_bytes: Bytes,
    pub optimal_bytes: Bytes,
    pub gemel: MergePlan,
    /// Other strategies, unbounded; compare them with `savings_at(budget_minutes)`.
    pub variants: Vec<MergePlan>,
    pub budget_minutes: f64,
    pub optimal: Option<MergePlan>,
    pub mainstream: Option<MainstreamPlan>,
}

impl WorkloadPlans {
    pub fn variant(&self, name: &str) -> Option<&MergePlan> {
        self.variants.iter().find(|p| p.strategy == name)
    }

    /// Merge configuration and per-query accuracy factor of a named plan.
    pub fn merged(&self, name: &str) -> Option<(&MergeConfig, BTreeMap<String, f64>)> {
        match name {
            "gemel" => Some((&self.gemel.config, self.gemel.final_accuracy.clone())),
            "optimal" => self.optimal.as_ref().map(|p| (&p.config, BTreeMap::new())),
            "mainstream" => self.mainstream.as_ref().map(|p| (&p.config, p.accuracy.clone())),
            other => self.variant(other).map(|p| (&p.config, p.final_accuracy.clone())),
        }
    }
}

/// One edge run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellMetrics {
    pub gpu_bytes: Bytes,
    pub feasible: bool,
    pub batches: BTreeMap<String, u32>,
    pub arrived: u64,
    pub processed: u64,
    pub skipped_fraction: f64,
    pub accuracy: f64,
    /// `accuracy` relative to the workload's no-swap run.
    pub relative_accuracy: f64,
    pub blocked_ms: f64,
    pub blocked_fraction: f64,
    pub swap_count: u64,
    pub bytes_swapped: Bytes,
    pub min_throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub workload_id: String,
    pub class: Option<WorkloadClass>,
    pub level: MemoryLevel,
    pub plan: String,
    pub result: Result<CellMetrics, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub workload_id: String,
    pub level: MemoryLevel,
    pub knob: &'static str,
    pub value: f64,
    pub unmerged_accuracy: f64,
    pub merged_accuracy: f64,
    /// Unmerged accuracy with every model resident, at the same knobs.
    pub reference_accuracy: f64,
}

impl SweepRow {
    /// Accuracy gain of merging, relative to the no-swap run.
    pub fn win(&self) -> f64 {
        relative(self.merged_accuracy, self.reference_accuracy) - relative(self.unmerged_accuracy, self.reference_accuracy)
    }
}

/// `accuracy` as a share of the no-swap accuracy; unscaled when that is zero.
pub fn relative(accuracy: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        accuracy / reference
    } else {
        accuracy
    }
}

/// Unmerged accuracy with all models resident.
pub fn reference_accuracy(w: &WorkloadSpec, catalog: &Catalog, cfg: &Config, knobs: &CellKnobs) -> Result<f64, BenchError> {
    let gpu = gpu_for(w, catalog, MemoryLevel::NoSwap)?;
    Ok(run_cell(w, catalog, cfg, gpu, None, knobs)?.accuracy)
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakdownRow {
    pub workload_id: String,
    pub training_minutes: f64,
    pub matching_minutes: f64,
    pub serialization_minutes: f64,
    pub blocked_fraction_before: f64,
    pub blocked_fraction_after: f64,
}

pub struct ExperimentResult {
    pub seed: u64,
    pub config_hash: String,
    pub catalog_hash: String,
    pub plans: Vec<Result<WorkloadPlans, String>>,
    pub cells: Vec<Cell>,
    pub sweep: Vec<SweepRow>,
    pub breakdown: Vec<BreakdownRow>,
}

impl ExperimentResult {
    pub fn plans_for(&self, workload_id: &str) -> Option<&WorkloadPlans> {
        self.plans.iter().filter_map(|p| p.as_ref().ok()).find(|p| p.workload_id == workload_id)
    }

    pub fn cell(&self, workload_id: &str, level: MemoryLevel, plan: &str) -> Option<&CellMetrics> {
        self.cells
            .iter()
            .find(|c| c.workload_id == workload_id && c.level == level && c.plan == plan)
            .and_then(|c| c.result.as_ref().ok())
    }
}

pub fn build_oracle(cfg: &Config) -> Result<Box<dyn RetrainingOracle>, BenchError> {
    Ok(OracleRegistry::with_builtins().build(&cfg.oracle, cfg.seed)?)
}

pub fn plan_workload(lw: &LabeledWorkload, catalog: &Catalog, cfg: &Config) -> Result<WorkloadPlans, BenchError> {
    let w = &lw.workload;
    let problem = MergeProblem::new(w, catalog)?;
    let oracle = build_oracle(cfg)?;
    let registry = StrategyRegistry::with_builtins();
    let gemel = run_strategy(&problem, oracle.as_ref(), registry.get("gemel")?.as_ref(), &cfg.merge, cfg.seed)?;
    let budget_minutes = cfg.experiment.variant_budget_fraction * gemel.total_minutes;
    let mut variants = Vec::new();
    for name in cfg.experiment.strategies.iter().filter(|s| *s != "gemel") {
        let strategy = registry.get(name)?;
        variants.push(run_strategy(&problem, oracle.as_ref(), strategy.as_ref(), &cfg.merge, cfg.seed)?);
    }
    let optimal = cfg.experiment.optimal.then(|| optimal_plan(&problem));
    let mainstream = cfg
        .experiment
        .mainstream
        .then(|| mainstream::plan(w, catalog, &cfg.mainstream, &cfg.oracle.difficulty))
        .transpose()?;
    Ok(WorkloadPlans {
        workload_id: w.workload_id.clone(),
        class: lw.class,
        param_bytes: problem.param_bytes(),
        optimal_bytes: problem.optimal_bytes(),
        gemel,
        variants,
        budget_minutes,
        optimal,
        mainstream,
    })
}

/// Edge knobs of one simulated cell.
#[derive(Debug, Clone, Default)]
pub struct CellKnobs {
    pub sla_ms: Option<f64>,
    pub fps: Option<f64>,
}

/// Profiles batch sizes for `merged`, then simulates the chosen plan.
pub fn run_cell(
    w: &WorkloadSpec,
    catalog: &Catalog,
    cfg: &Config,
    gpu_bytes: Bytes,
    merged: Option<(&MergeConfig, BTreeMap<String, f64>)>,
    knobs: &CellKnobs,
) -> Result<CellMetrics, BenchError> {
    let order = if merged.is_some() {
        &cfg.simulation.merged_order_policy
    } else {
        &cfg.simulation.order_policy
    };
    let opts = ProfileOptions {
        order_policy: order.clone(),
        sla_ms: knobs.sla_ms.or(cfg.profile.sla_ms),
        fps: knobs.fps.or(cfg.profile.fps),
        ..cfg.profile.clone()
    };
    let batch_plan = select_batches(w, catalog, gpu_bytes, merged.as_ref().map(|m| m.0), &opts)?;
    let (merge_config, merged_factor) = match merged {
        Some((c, f)) => (c.clone(), f),
        None => (MergeConfig::default(), BTreeMap::new()),
    };
    let sim = SimConfig {
        gpu_bytes,
        sla_ms: opts.sla_ms,
        fps: opts.fps,
        duration_s: cfg.simulation.duration_s,
        batch_plan: batch_plan.batches.clone(),
        merge_config,
        order_policy: order.clone(),
        merged_factor,
        per_frame_accuracy: cfg.simulation.per_frame_accuracy,
        ..SimConfig::default()
    };
    let r = simulate(&sim, w, catalog)?;
    Ok(metrics(&r, batch_plan.feasible, batch_plan.batches))
}

fn metrics(r: &SimReport, feasible: bool, batches: BTreeMap<String, u32>) -> CellMetrics {
    CellMetrics {
        gpu_bytes: r.gpu_bytes,
        feasible,
        batches,
        arrived: r.arrived(),
        processed: r.processed(),
        skipped_fraction: r.skipped_fraction(),
        accuracy: r.workload_accuracy,
        relative_accuracy: r.workload_accuracy,
        blocked_ms: r.time_blocked_loading_ms,
        blocked_fraction: r.blocked_fraction(),
        swap_count: r.swap_count,
        bytes_swapped: r.bytes_swapped,
        min_throughput: r.min_throughput(),
    }
}

pub fn levels(names: &[String]) -> Result<Vec<MemoryLevel>, BenchError> {
    names
        .iter()
        .map(|l| MemoryLevel::parse(l).ok_or_else(|| BenchError::Config(format!("unknown memory level `{l}`"))))
        .collect()
}

pub fn gpu_for(w: &WorkloadSpec, catalog: &Catalog, level: MemoryLevel) -> Result<Bytes, BenchError> {
    Ok(memory_settings(w, catalog, &|_| 1)?.get(level))
}

fn pool(cfg: &Config) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))
}

pub fn catalog_hash(catalog: &Catalog) -> String {
    hex::encode(Sha256::digest(catalog.to_json().as_bytes()))
}

pub fn run_experiment(
    workloads: &[LabeledWorkload],
    catalog: &Catalog,
    cfg: &Config,
) -> Result<ExperimentResult, BenchError> {
    let level_list = levels(&cfg.memory.levels)?;
    let pool = pool(cfg)?;
    let plans: Vec<Result<WorkloadPlans, String>> = pool.install(|| {
        workloads
            .par_iter()
            .map(|lw| plan_workload(lw, catalog, cfg).map_err(|e| e.to_string()))
            .collect()
    });

    let mut jobs = Vec::new();
    for (lw, p) in workloads.iter().zip(&plans) {
        for &level in &level_list {
            jobs.push((lw, p, level, UNMERGED.to_string()));
            for name in &cfg.experiment.simulate {
                jobs.push((lw, p, level, name.clone()));
            }
        }
    }
    let mut cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|(lw, plans, level, name)| {
                let w = &lw.workload;
                let result = (|| {
                    let gpu = gpu_for(w, catalog, *level)?;
                    let merged = if name == UNMERGED {
                        None
                    } else {
                        let p = plans.as_ref().map_err(|e| BenchError::Config(e.clone()))?;
                        Some(p.merged(name).ok_or_else(|| BenchError::Config(format!("no plan named `{name}`")))?)
                    };
                    run_cell(w, catalog, cfg, gpu, merged, &CellKnobs::default())
                })()
                .map_err(|e| e.to_string());
                Cell {
                    workload_id: w.workload_id.clone(),
                    class: lw.class,
                    level: *level,
                    plan: name.clone(),
                    result,
                }
            })
            .collect()
    });

    let references: Vec<Result<f64, BenchError>> = pool.install(|| {
        workloads
            .par_iter()
            .map(|lw| reference_accuracy(&lw.workload, catalog, cfg, &CellKnobs::default()))
            .collect()
    });
    let references: BTreeMap<&str, f64> = workloads
        .iter()
        .zip(references)
        .filter_map(|(lw, r)| Some((lw.workload.workload_id.as_str(), r.ok()?)))
        .collect();
    for c in &mut cells {
        if let (Ok(m), Some(r)) = (&mut c.result, references.get(c.workload_id.as_str())) {
            m.relative_accuracy = relative(m.accuracy, *r);
        }
    }

    let sweep = if cfg.sweep.enabled {
        crate::sweep::run_sweep(workloads, &plans, catalog, cfg, &pool)?
    } else {
        Vec::new()
    };
    let breakdown = crate::breakdown::breakdown(workloads, &plans, &cells, catalog, cfg);
    Ok(ExperimentResult {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        catalog_hash: catalog_hash(catalog),
        plans,
        cells,
        sweep,
        breakdown,
    })
}

fn csv_of<F>(header: &str, rows: impl IntoIterator<Item = F>) -> String
where
    F: AsRef<str>,
{
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(r.as_ref());
        s.push('\n');
    }
    s
}

fn class_label(c: Option<WorkloadClass>) -> &'static str {
    c.map_or("", WorkloadClass::label)
}

fn frac(a: Bytes, b: Bytes) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn savings_csv(res: &ExperimentResult) -> String {
    let mut rows = Vec::new();
    for p in res.plans.iter().filter_map(|p| p.as_ref().ok()) {
        let mut row = |strategy: &str, bytes: Bytes, at_budget: Bytes, minutes: f64, successes: usize| {
            rows.push(format!(
                "{},{},{},{},{},{},{:.6},{:.6},{:.3},{},{:.3},{}",
                p.workload_id,
                class_label(p.class),
                p.param_bytes,
                p.optimal_bytes,
                strategy,
                bytes,
                frac(bytes, p.param_bytes),
                frac(bytes, p.optimal_bytes),
                p.budget_minutes,
                at_budget,
                minutes,
                successes
            ))
        };
        let g = &p.gemel;
        row("gemel", g.savings(), g.savings(), g.total_minutes, g.successes());
        for v in &p.variants {
            row(&v.strategy, v.savings(), v.savings_at(p.budget_minutes), v.total_minutes, v.successes());
        }
        if let Some(o) = &p.optimal {
            row("optimal", o.savings(), o.savings(), 0.0, 0);
        }
        if let Some(m) = &p.mainstream {
            row("mainstream", m.savings(), m.savings(), 0.0, 0);
        }
    }
    csv_of(
        "workload,class,param_bytes,optimal_bytes,strategy,savings_bytes,savings_fraction,of_optimal,budget_minutes,savings_at_budget,total_minutes,successes",
        rows,
    )
}

pub fn cells_csv(res: &ExperimentResult) -> String {
    let rows = res.cells.iter().map(|c| {
        let head = format!("{},{},{},{}", c.workload_id, class_label(c.class), c.level.label(), c.plan);
        match &c.result {
            Ok(m) => format!(
                "{head},ok,{},{},{},{},{:.6},{:.6},{:.6},{:.3},{:.6},{},{},{:.4},",
                m.gpu_bytes,
                m.feasible,
                m.arrived,
                m.processed,
                m.skipped_fraction,
                m.accuracy,
                m.relative_accuracy,
                m.blocked_ms,
                m.blocked_fraction,
                m.swap_count,
                m.bytes_swapped,
                m.min_throughput
            ),
            Err(e) => format!("{head},error,,,,,,,,,,,,,\"{}\"", e.replace('"', "'")),
        }
    });
    csv_of(
        "workload,class,level,plan,status,gpu_bytes,feasible,arrived,processed,skipped_fraction,accuracy,relative_accuracy,blocked_ms,blocked_fraction,swaps,bytes_swapped,min_throughput,error",
        rows,
    )
}

pub fn wins_csv(res: &ExperimentResult) -> String {
    let mut rows = Vec::new();
    for c in res.cells.iter().filter(|c| c.plan != UNMERGED) {
        let (Ok(m), Some(base)) = (&c.result, res.cell(&c.workload_id, c.level, UNMERGED)) else {
            continue;
        };
        rows.push(format!(
            "{},{},{},{},{:.6},{},{:.3}",
            c.workload_id,
            class_label(c.class),
            c.level.label(),
            c.plan,
            m.relative_accuracy - base.relative_accuracy,
            m.processed as i64 - base.processed as i64,
            base.blocked_ms - m.blocked_ms
        ));
    }
    csv_of("workload,class,level,plan,accuracy_win,processed_gain,blocked_ms_saved", rows)
}

pub fn timeline_csv(res: &ExperimentResult) -> String {
    let mut rows = Vec::new();
    for p in res.plans.iter().filter_map(|p| p.as_ref().ok()) {
        for plan in std::iter::once(&p.gemel).chain(&p.variants) {
            for (s, b) in plan.savings_timeline.iter().zip(&plan.bandwidth_timeline) {
                rows.push(format!("{},{},{:.3},{},{}", p.workload_id, plan.strategy, s.minutes, s.bytes, b.bytes));
            }
        }
    }
    csv_of("workload,strategy,minutes,savings_bytes,shipped_bytes", rows)
}

pub fn sweep_csv(res: &ExperimentResult) -> String {
    let rows = res.sweep.iter().map(|r| {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.workload_id,
            r.level.label(),
            r.knob,
            r.value,
            r.unmerged_accuracy,
            r.merged_accuracy,
            r.reference_accuracy,
            r.win()
        )
    });
    csv_of("workload,level,knob,value,unmerged_accuracy,merged_accuracy,reference_accuracy,accuracy_win", rows)
}

pub fn breakdown_csv(res: &ExperimentResult) -> String {
    let rows = res.breakdown.iter().map(|b| {
        format!(
            "{},{:.3},{:.6},{:.6},{:.6},{:.6}",
            b.workload_id,
            b.training_minutes,
            b.matching_minutes,
            b.serialization_minutes,
            b.blocked_fraction_before,
            b.blocked_fraction_after
        )
    });
    csv_of(
        "workload,training_minutes,matching_minutes,serialization_minutes,blocked_fraction_before,blocked_fraction_after",
        rows,
    )
}

pub fn summary(res: &ExperimentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed {}  config {}  catalog {}", res.seed, &res.config_hash[..12], &res.catalog_hash[..12]);
    let _ = writeln!(s, "\n{:<8} {:>3} {:>9} {:>9} {:>9} {:>9}", "workload", "cls", "optimal", "gemel", "mainstr", "minutes");
    for p in &res.plans {
        match p {
            Ok(p) => {
                let _ = writeln!(
                    s,
                    "{:<8} {:>3} {:>8.1}% {:>8.1}% {:>8.1}% {:>9.0}",
                    p.workload_id,
                    class_label(p.class),
                    100.0 * frac(p.optimal_bytes, p.param_bytes),
                    100.0 * p.gemel.savings_fraction(),
                    100.0 * p.mainstream.as_ref().map_or(0.0, |m| m.savings_fraction()),
                    p.gemel.total_minutes
                );
            }
            Err(e) => {
                let _ = writeln!(s, "plan error: {e}");
            }
        }
    }
    let _ = writeln!(s, "\n{:<8} {:>7} {:<10} {:>9} {:>9} {:>9}", "workload", "level", "plan", "skipped", "accuracy", "blocked");
    for c in &res.cells {
        match &c.result {
            Ok(m) => {
                let _ = writeln!(
                    s,
                    "{:<8} {:>7} {:<10} {:>8.1}% {:>9.4} {:>8.1}%",
                    c.workload_id,
                    c.level.label(),
                    c.plan,
                    100.0 * m.skipped_fraction,
                    m.accuracy,
                    100.0 * m.blocked_fraction
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{:<8} {:>7} {:<10} error: {e}", c.workload_id, c.level.label(), c.plan);
            }
        }
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    config_hash: &'a str,
    catalog_hash: &'a str,
    workloads: Vec<&'a str>,
    files: BTreeMap<String, String>,
    bundle_hash: String,
}

/// Writes the bundle under `dir` and returns the manifest's bundle hash.
pub fn write_bundle(res: &ExperimentResult, cfg: &Config, dir: &Path) -> Result<String, BenchError> {
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    files.insert("savings.csv".into(), savings_csv(res));
    files.insert("cells.csv".into(), cells_csv(res));
    files.insert("wins.csv".into(), wins_csv(res));
    files.insert("timeline.csv".into(), timeline_csv(res));
    files.insert("breakdown.csv".into(), breakdown_csv(res));
    if cfg.sweep.enabled {
        files.insert("sweep.csv".into(), sweep_csv(res));
    }
    files.insert("summary.txt".into(), summary(res));
    if cfg.experiment.write_plans {
        for p in res.plans.iter().filter_map(|p| p.as_ref().ok()) {
            files.insert(format!("plans/{}-gemel.json", p.workload_id), p.gemel.to_json());
            for v in &p.variants {
                files.insert(format!("plans/{}-{}.json", p.workload_id, v.strategy), v.to_json());
            }
            if let Some(m) = &p.mainstream {
                let json = serde_json::to_string_pretty(m).expect("plan serializes");
                files.insert(format!("plans/{}-mainstream.json", p.workload_id), json);
            }
        }
    }
    let digests: BTreeMap<String, String> = files
        .iter()
        .map(|(k, v)| (k.clone(), hex::encode(Sha256::digest(v.as_bytes()))))
        .collect();
    let mut h = Sha256::new();
    for (k, v) in &digests {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    let bundle_hash = hex::encode(h.finalize());
    let manifest = Manifest {
        seed: res.seed,
        config_hash: &res.config_hash,
        catalog_hash: &res.catalog_hash,
        workloads: res.plans.iter().filter_map(|p| p.as_ref().ok()).map(|p| p.workload_id.as_str()).collect(),
        files: digests,
        bundle_hash: bundle_hash.clone(),
    };
    files.insert("manifest.json".into(), serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
    for (name, text) in &files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
        }
        std::fs::write(&path, text).map_err(|e| BenchError::io(&path, e))?;
    }
    Ok(bundle_hash)
}

/// Settings with the accuracy target replaced.
pub fn with_target(settings: &MergeSettings, target: f64) -> MergeSettings {
    MergeSettings {
        accuracy_target: Some(target),
        ..settings.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::builtin_workloads;
    use crate::zoo;

    fn small_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.memory.levels = vec!["min".into()];
        cfg.simulation.duration_s = 10.0;
        cfg.profile.eval_horizon_s = 2.0;
        cfg.profile.report_horizon_s = 10.0;
        cfg.threads = 2;
        cfg
    }

    fn lp2() -> Vec<LabeledWorkload> {
        builtin_workloads(&Default::default()).into_iter().filter(|w| w.workload.workload_id == "LP2").collect()
    }

    #[test]
    fn lp2_experiment_produces_every_cell() {
        let catalog = zoo::corpus();
        let res = run_experiment(&lp2(), &catalog, &small_cfg()).unwrap();
        assert_eq!(res.cells.len(), 4);
        assert!(res.cells.iter().all(|c| c.result.is_ok()), "{:?}", res.cells);
        let p = res.plans_for("LP2").unwrap();
        assert_eq!(p.variants.len(), 5);
        assert!(p.gemel.savings() <= p.optimal_bytes);
        let base = res.cell("LP2", MemoryLevel::Min, UNMERGED).unwrap();
        let opt = res.cell("LP2", MemoryLevel::Min, "optimal").unwrap();
        assert!(opt.processed >= base.processed);
    }

    #[test]
    fn bundles_are_byte_identical_across_runs() {
        let catalog = zoo::corpus();
        let cfg = small_cfg();
        let dir = std::env::temp_dir().join(format!("gemel-bundle-test-{}", std::process::id()));
        let a = write_bundle(&run_experiment(&lp2(), &catalog, &cfg).unwrap(), &cfg, &dir.join("a")).unwrap();
        let b = write_bundle(&run_experiment(&lp2(), &catalog, &cfg).unwrap(), &cfg, &dir.join("b")).unwrap();
        assert_eq!(a, b);
        let ma = std::fs::read(dir.join("a/manifest.json")).unwrap();
        let mb = std::fs::read(dir.join("b/manifest.json")).unwrap();
        assert_eq!(ma, mb);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_simulated_plan_is_a_cell_error() {
        let catalog = zoo::corpus();
        let mut cfg = small_cfg();
        cfg.experiment.simulate = vec!["nope".into()];
        let res = run_experiment(&lp2(), &catalog, &cfg).unwrap();
        let bad = res.cells.iter().find(|c| c.plan == "nope").unwrap();
        assert!(bad.result.is_err());
        assert!(cells_csv(&res).contains(",error,"));
    }
}
