//! Where merging time goes, and how much edge blocking it removes.

use gemel_core::catalog::Catalog;

use crate::config::Config;
use crate::corpus::LabeledWorkload;
use crate::experiment::{BreakdownRow, Cell, WorkloadPlans, UNMERGED};

/// Layer signature comparisons needed to match every pair of queries.
pub fn comparisons(lw: &LabeledWorkload, catalog: &Catalog) -> u64 {
    let sizes: Vec<u64> = lw
        .workload
        .queries
        .iter()
        .map(|q| catalog.get(&q.model_id).map_or(0, |m| m.layers.len() as u64))
        .collect();
    let mut total = 0;
    for i in 0..sizes.len() {
        for j in i + 1..sizes.len() {
            total += sizes[i] * sizes[j];
        }
    }
    total
}

fn blocked(cells: &[Cell], workload: &str, plan: &str) -> f64 {
    // Lowest memory level that was simulated.
    cells
        .iter()
        .filter(|c| c.workload_id == workload && c.plan == plan)
        .filter_map(|c| c.result.as_ref().ok().map(|m| (c.level, m.blocked_fraction)))
        .min_by_key(|(l, _)| *l)
        .map_or(f64::NAN, |(_, b)| b)
}

pub fn breakdown(
    workloads: &[LabeledWorkload],
    plans: &[Result<WorkloadPlans, String>],
    cells: &[Cell],
    catalog: &Catalog,
    cfg: &Config,
) -> Vec<BreakdownRow> {
    let b = &cfg.breakdown;
    workloads
        .iter()
        .zip(plans)
        .filter_map(|(lw, p)| {
            let p = p.as_ref().ok()?;
            let shipped: u64 = p.gemel.config.history.iter().map(|i| i.shipped_bytes).sum();
            Some(BreakdownRow {
                workload_id: p.workload_id.clone(),
                training_minutes: p.gemel.training_minutes(),
                matching_minutes: comparisons(lw, catalog) as f64 * b.matching_us_per_comparison / 60e6,
                serialization_minutes: shipped as f64 / (b.serialization_mb_per_s * 1e6) / 60.0,
                blocked_fraction_before: blocked(cells, &p.workload_id, UNMERGED),
                blocked_fraction_after: blocked(cells, &p.workload_id, "gemel"),
            })
        })
        .collect()
}
