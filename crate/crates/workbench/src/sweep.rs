//! Edge knob sweeps: SLA, frame rate and accuracy target.

use gemel_core::merging::{run_strategy, MergeProblem, StrategyRegistry};
use rayon::prelude::*;

use crate::config::Config;
use crate::corpus::LabeledWorkload;
use crate::error::BenchError;
use crate::experiment::{
    build_oracle, gpu_for, levels, reference_accuracy, run_cell, with_target, CellKnobs, SweepRow, WorkloadPlans,
};
use gemel_core::catalog::Catalog;

enum Job<'a> {
    Knob {
        lw: &'a LabeledWorkload,
        plans: &'a WorkloadPlans,
        level: gemel_core::catalog::MemoryLevel,
        knob: &'static str,
        value: f64,
    },
    Target {
        lw: &'a LabeledWorkload,
        level: gemel_core::catalog::MemoryLevel,
        value: f64,
    },
}

/// SLA and fps rows merge with the configured plan. Accuracy-target rows
/// rerun the heuristic with the target replaced.
pub fn run_sweep(
    workloads: &[LabeledWorkload],
    plans: &[Result<WorkloadPlans, String>],
    catalog: &Catalog,
    cfg: &Config,
    pool: &rayon::ThreadPool,
) -> Result<Vec<SweepRow>, BenchError> {
    let s = &cfg.sweep;
    let level_list = levels(&s.levels)?;
    let mut jobs = Vec::new();
    for (lw, p) in workloads.iter().zip(plans) {
        if !s.workloads.is_empty() && !s.workloads.contains(&lw.workload.workload_id) {
            continue;
        }
        let Ok(p) = p else { continue };
        for &level in &level_list {
            for &value in &s.sla_ms {
                jobs.push(Job::Knob { lw, plans: p, level, knob: "sla_ms", value });
            }
            for &value in &s.fps {
                jobs.push(Job::Knob { lw, plans: p, level, knob: "fps", value });
            }
            for &value in &s.accuracy_targets {
                jobs.push(Job::Target { lw, level, value });
            }
        }
    }
    let rows: Vec<Result<SweepRow, BenchError>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| match job {
                Job::Knob { lw, plans, level, knob, value } => {
                    let w = &lw.workload;
                    let gpu = gpu_for(w, catalog, *level)?;
                    let knobs = match *knob {
                        "sla_ms" => CellKnobs { sla_ms: Some(*value), fps: None },
                        _ => CellKnobs { sla_ms: None, fps: Some(*value) },
                    };
                    let merged = plans
                        .merged(&s.strategy)
                        .ok_or_else(|| BenchError::Config(format!("sweep: no plan named `{}`", s.strategy)))?;
                    let base = run_cell(w, catalog, cfg, gpu, None, &knobs)?;
                    let with = run_cell(w, catalog, cfg, gpu, Some(merged), &knobs)?;
                    let reference = reference_accuracy(w, catalog, cfg, &knobs)?;
                    Ok(SweepRow {
                        workload_id: w.workload_id.clone(),
                        level: *level,
                        knob,
                        value: *value,
                        unmerged_accuracy: base.accuracy,
                        merged_accuracy: with.accuracy,
                        reference_accuracy: reference,
                    })
                }
                Job::Target { lw, level, value } => {
                    let w = &lw.workload;
                    let gpu = gpu_for(w, catalog, *level)?;
                    let problem = MergeProblem::new(w, catalog)?;
                    let oracle = build_oracle(cfg)?;
                    let gemel = StrategyRegistry::with_builtins().get("gemel")?;
                    let plan = run_strategy(&problem, oracle.as_ref(), gemel.as_ref(), &with_target(&cfg.merge, *value), cfg.seed)?;
                    let knobs = CellKnobs::default();
                    let base = run_cell(w, catalog, cfg, gpu, None, &knobs)?;
                    let with = run_cell(w, catalog, cfg, gpu, Some((&plan.config, plan.final_accuracy.clone())), &knobs)?;
                    let reference = reference_accuracy(w, catalog, cfg, &knobs)?;
                    Ok(SweepRow {
                        workload_id: w.workload_id.clone(),
                        level: *level,
                        knob: "accuracy_target",
                        value: *value,
                        unmerged_accuracy: base.accuracy,
                        merged_accuracy: with.accuracy,
                        reference_accuracy: reference,
                    })
                }
            })
            .collect()
    });
    rows.into_iter().collect()
}
