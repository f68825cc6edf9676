use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gemel_core::catalog::{Catalog, MemoryLevel, WorkloadSpec};
use gemel_core::matching::{enumerate_groups, optimal_savings, pairwise_overlap};
use gemel_core::merging::{run_strategy, MergeConfig, MergeProblem, StrategyRegistry};
use gemel_core::profiler::{select_batches, ProfileOptions};
use gemel_core::simulator::{simulate, SimConfig};
use gemel_workbench::config::Config;
use gemel_workbench::corpus::{self, resolve_workload};
use gemel_workbench::error::BenchError;
use gemel_workbench::experiment::{self, build_oracle, gpu_for};
use gemel_workbench::generalize;
use gemel_workbench::mainstream;
use serde_json::json;

#[derive(Parser)]
#[command(name = "gemel-sim", version, about = "Plan and simulate layer merging for edge vision workloads")]
struct Cli {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Share groups and optimal savings of a workload, or the overlap of two models.
    Match {
        #[arg(long, conflicts_with = "pair")]
        workload: Option<String>,
        #[arg(long, num_args = 2, value_names = ["MODEL_A", "MODEL_B"])]
        pair: Option<Vec<String>>,
    },
    /// Runs one merge strategy and prints the plan.
    Merge {
        #[arg(long)]
        workload: String,
        /// A registered strategy, `optimal` or `mainstream`.
        #[arg(long, default_value = "gemel")]
        strategy: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chooses batch sizes for a memory level.
    Profile(EdgeArgs),
    /// Simulates a workload on the edge.
    Simulate {
        #[command(flatten)]
        edge: EdgeArgs,
        /// Writes the event trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Runs the configured experiment and writes its bundle.
    Experiment {
        /// Output directory; the config's output_dir when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the knob generalization study.
    Generalize {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EdgeArgs {
    #[arg(long)]
    workload: String,
    /// One of min, 50, 75, no_swap.
    #[arg(long, default_value = "min")]
    level: String,
    /// GPU bytes; overrides the level.
    #[arg(long)]
    gpu_bytes: Option<u64>,
    /// Merge plan JSON written by `merge`; unmerged when omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    sla_ms: Option<f64>,
    #[arg(long)]
    fps: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<Config, BenchError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

fn read_plan(path: &Path) -> Result<MergeConfig, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    // Any plan written by `merge` carries its configuration under `config`.
    let bad = |e: serde_json::Error| BenchError::Config(format!("{}: {e}", path.display()));
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    serde_json::from_value(v["config"].take()).map_err(bad)
}

fn level(name: &str) -> Result<MemoryLevel, BenchError> {
    MemoryLevel::parse(name).ok_or_else(|| BenchError::Config(format!("unknown memory level `{name}`")))
}

struct Edge {
    w: WorkloadSpec,
    gpu: u64,
    merged: Option<MergeConfig>,
    opts: ProfileOptions,
}

fn edge(args: &EdgeArgs, cfg: &Config, catalog: &Catalog) -> Result<Edge, BenchError> {
    let w = resolve_workload(&args.workload, cfg)?;
    w.validate(catalog)?;
    let gpu = match args.gpu_bytes {
        Some(b) => b,
        None => gpu_for(&w, catalog, level(&args.level)?)?,
    };
    let merged = args.plan.as_deref().map(read_plan).transpose()?;
    let order = if merged.is_some() {
        &cfg.simulation.merged_order_policy
    } else {
        &cfg.simulation.order_policy
    };
    let opts = ProfileOptions {
        order_policy: order.clone(),
        sla_ms: args.sla_ms.or(cfg.profile.sla_ms),
        fps: args.fps.or(cfg.profile.fps),
        ..cfg.profile.clone()
    };
    Ok(Edge { w, gpu, merged, opts })
}

fn run(cli: Cli) -> Result<String, BenchError> {
    let cfg = load_config(&cli)?;
    let catalog = corpus::catalog(&cfg)?;
    match cli.command {
        Command::Match { workload, pair } => {
            if let Some(p) = pair {
                let o = pairwise_overlap(catalog.get(&p[0])?, catalog.get(&p[1])?);
                return Ok(serde_json::to_string_pretty(&o).expect("serializes"));
            }
            let id = workload.ok_or_else(|| BenchError::Config("match needs --workload or --pair".into()))?;
            let w = resolve_workload(&id, &cfg)?;
            let groups = enumerate_groups(&w, &catalog)?;
            let savings = optimal_savings(&w, &catalog)?;
            let top: Vec<_> = groups
                .iter()
                .take(10)
                .map(|g| json!({"group": g.id(), "size": g.size(), "reclaimable_bytes": g.reclaimable_bytes}))
                .collect();
            Ok(serde_json::to_string_pretty(&json!({
                "workload": w.workload_id,
                "groups": groups.len(),
                "optimal_bytes": savings.bytes,
                "optimal_fraction": savings.fraction,
                "heaviest": top,
            }))
            .expect("serializes"))
        }
        Command::Merge { workload, strategy, out } => {
            let w = resolve_workload(&workload, &cfg)?;
            let problem = MergeProblem::new(&w, &catalog)?;
            let text = match strategy.as_str() {
                "optimal" => gemel_core::merging::optimal_plan(&problem).to_json(),
                "mainstream" => {
                    let p = mainstream::plan(&w, &catalog, &cfg.mainstream, &cfg.oracle.difficulty)?;
                    serde_json::to_string_pretty(&p).expect("serializes")
                }
                name => {
                    let oracle = build_oracle(&cfg)?;
                    let s = StrategyRegistry::with_builtins().get(name)?;
                    run_strategy(&problem, oracle.as_ref(), s.as_ref(), &cfg.merge, cfg.seed)?.to_json()
                }
            };
            match out {
                Some(path) => {
                    write(&path, &text)?;
                    Ok(json!({"written": path.display().to_string()}).to_string())
                }
                None => Ok(text),
            }
        }
        Command::Profile(args) => {
            let e = edge(&args, &cfg, &catalog)?;
            let plan = select_batches(&e.w, &catalog, e.gpu, e.merged.as_ref(), &e.opts)?;
            Ok(plan.to_json())
        }
        Command::Simulate { edge: args, trace } => {
            let e = edge(&args, &cfg, &catalog)?;
            let plan = select_batches(&e.w, &catalog, e.gpu, e.merged.as_ref(), &e.opts)?;
            let sim = SimConfig {
                gpu_bytes: e.gpu,
                sla_ms: e.opts.sla_ms,
                fps: e.opts.fps,
                duration_s: cfg.simulation.duration_s,
                batch_plan: plan.batches,
                merge_config: e.merged.unwrap_or_default(),
                order_policy: e.opts.order_policy.clone(),
                per_frame_accuracy: cfg.simulation.per_frame_accuracy,
                record_trace: trace.is_some(),
                ..SimConfig::default()
            };
            let report = simulate(&sim, &e.w, &catalog)?;
            if let Some(path) = trace {
                write(&path, &report.trace_csv())?;
            }
            let mut report = report;
            report.trace = None;
            Ok(report.to_json())
        }
        Command::Experiment { out } => {
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let workloads = corpus::experiment_workloads(&cfg, &catalog)?;
            let res = experiment::run_experiment(&workloads, &catalog, &cfg)?;
            let hash = experiment::write_bundle(&res, &cfg, &dir)?;
            let failed = res.cells.iter().filter(|c| c.result.is_err()).count()
                + res.plans.iter().filter(|p| p.is_err()).count();
            Ok(json!({"bundle_hash": hash, "dir": dir.display().to_string(), "failed_cells": failed}).to_string())
        }
        Command::Generalize { out } => {
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let samples = generalize::run(&cfg)?;
            let rows = generalize::summarize(&samples);
            write(&dir.join("generalization.csv"), &generalize::rows_csv(&rows))?;
            write(&dir.join("generalization_samples.csv"), &generalize::samples_csv(&samples))?;
            Ok(generalize::rows_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            use std::io::Write;
            let _ = write!(std::io::stdout(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let record = json!({"kind": "usage", "message": e.to_string().trim_end()});
            eprintln!("{record}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(text) => {
            use std::io::Write;
            // A closed pipe downstream is not a failure of the run.
            let _ = writeln!(std::io::stdout(), "{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).expect("record serializes"));
            ExitCode::from(1)
        }
    }
}
