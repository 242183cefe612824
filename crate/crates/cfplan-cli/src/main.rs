//! `cfplan`: run experiment plans, replay single results, build report
//! tables, and check system definitions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cfplan_cli::grid::{
    build_manifest, replay_row, rows_from_csv, rows_to_csv, run_grid, Manifest,
};
use cfplan_cli::plan::parse_plan;
use cfplan_cli::report::{
    aggregate, best_rows_to_csv, cost_by_demand, cost_by_demand_to_csv, render_table,
    select_min_cost, select_min_cost_by_cf,
};
use cfplan_core::format::{parse_system, write_system};
use cfplan_core::system::{
    demand_rate_for_utilization, planned_utilization, preset, propagate_demand, ItemKind,
    ProductionSystem,
};

#[derive(Parser)]
#[command(name = "cfplan", version, about = "Experiment runner for the production planning laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for grid execution (0 = one per CPU).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Directory for result, manifest, and report files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override the plan's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario × replication cell of a plan file.
    Run { plan: PathBuf },
    /// Re-run one result row from a manifest and print it as CSV.
    Replay { manifest: PathBuf, row_id: u64 },
    /// Build best-parameter tables and plot-ready summaries from a result CSV.
    Report { csv: PathBuf },
    /// Parse and check a system definition (bundled preset name or file).
    Validate {
        system: String,
        /// Write the resolved system definition to a file.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { plan } => cmd_run(plan, &cli),
        Command::Replay { manifest, row_id } => cmd_replay(manifest, *row_id),
        Command::Report { csv } => cmd_report(csv, &cli.out_dir),
        Command::Validate { system, export } => cmd_validate(system, export.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// File stem for a plan's outputs: the plan name with anything exotic
/// replaced, so names stay portable.
fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    if out.is_empty() {
        out.push_str("plan");
    }
    out
}

fn cmd_run(plan_path: &Path, cli: &Cli) -> anyhow::Result<ExitCode> {
    let plan = parse_plan(plan_path)?;
    let base_seed = cli.seed.unwrap_or(plan.file.base_seed);
    let scenarios = cfplan_cli::plan::expand(&plan);
    let cells = scenarios.len() as u64 * plan.file.replications as u64;
    eprintln!(
        "plan {} on {}: {} scenarios x {} replications = {} cells (seed {})",
        plan.file.name,
        plan.system.name(),
        scenarios.len(),
        plan.file.replications,
        cells,
        base_seed
    );
    let started = Instant::now();
    let rows = run_grid(&plan, base_seed, cli.workers, true);
    let elapsed = started.elapsed();

    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("cannot create {}", cli.out_dir.display()))?;
    let stem = sanitize(&plan.file.name);
    let csv_name = format!("{stem}.results.csv");
    let csv_path = cli.out_dir.join(&csv_name);
    std::fs::write(&csv_path, rows_to_csv(&rows))
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    let manifest = build_manifest(&plan, base_seed, &rows, &csv_name);
    let manifest_path = cli.out_dir.join(format!("{stem}.manifest.json"));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;

    let failures = manifest.failures;
    eprintln!(
        "{} rows in {:.1}s -> {} ({} failures); manifest {}",
        rows.len(),
        elapsed.as_secs_f64(),
        csv_path.display(),
        failures,
        manifest_path.display()
    );
    if failures > 0 {
        for row in rows.iter().filter(|r| !r.is_ok()).take(5) {
            eprintln!("  row {}: {}", row.row_id, row.status);
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(manifest_path: &Path, row_id: u64) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(manifest_path)
        .with_context(|| format!("cannot read {}", manifest_path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a manifest", manifest_path.display()))?;
    let row = replay_row(&manifest, row_id)?;
    print!("{}", rows_to_csv(std::slice::from_ref(&row)));
    Ok(if row.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_report(csv_path: &Path, out_dir: &Path) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(csv_path)
        .with_context(|| format!("cannot read {}", csv_path.display()))?;
    let rows = rows_from_csv(&text)?;
    let aggs = aggregate(&rows);
    let (best, warnings) = select_min_cost(&aggs);
    let (by_cf, cf_warnings) = select_min_cost_by_cf(&aggs);
    for w in warnings.iter().chain(&cf_warnings) {
        eprintln!("warning: {w}");
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let stem = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results")
        .trim_end_matches(".results")
        .to_string();
    let best_path = out_dir.join(format!("{stem}.best-params.csv"));
    std::fs::write(&best_path, best_rows_to_csv(&best))?;
    let demand_path = out_dir.join(format!("{stem}.cost-by-demand.csv"));
    std::fs::write(&demand_path, cost_by_demand_to_csv(&cost_by_demand(&best)))?;
    let cf_path = out_dir.join(format!("{stem}.cf-leadtime.csv"));
    std::fs::write(&cf_path, best_rows_to_csv(&by_cf))?;

    print!("{}", render_table(&best));
    eprintln!(
        "wrote {}, {}, {}",
        best_path.display(),
        demand_path.display(),
        cf_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(spec: &str, export: Option<&Path>) -> anyhow::Result<ExitCode> {
    let system: ProductionSystem = match preset(spec) {
        Some(s) => s,
        None => {
            let text = std::fs::read_to_string(spec)
                .with_context(|| format!("{spec:?} is not a bundled preset or a readable file"))?;
            parse_system(&text).with_context(|| format!("invalid system file {spec}"))?
        }
    };
    let items = system.items();
    let ends = items.iter().filter(|i| i.kind == ItemKind::EndItem).count();
    let comps = items.iter().filter(|i| i.kind == ItemKind::Component).count();
    let raws = items.iter().filter(|i| i.kind == ItemKind::RawMaterial).count();
    println!(
        "system {}: {} end items, {} components, {} raw materials, {} machines, {} BOM levels",
        system.name(),
        ends,
        comps,
        raws,
        system.resources().len(),
        system.max_llc() + 1
    );
    println!("{:>6} {:>10} {:>22}", "target", "rate", "bottleneck utilization");
    for target in [0.80, 0.85, 0.90] {
        let x = demand_rate_for_utilization(&system, target);
        let per_item = propagate_demand(
            &system,
            &items
                .iter()
                .filter(|i| i.kind == ItemKind::EndItem)
                .map(|i| (i.id, x))
                .collect(),
        );
        let util = planned_utilization(&system, &per_item);
        let max = util.values().cloned().fold(0.0f64, f64::max);
        println!("{:>6} {:>10} {:>22.4}", target, x, max);
    }
    if let Some(path) = export {
        std::fs::write(path, write_system(&system))
            .with_context(|| format!("cannot write {}", path.display()))?;
        println!("exported to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
