//! Grid execution: run every (scenario, replication) cell of a plan, collect
//! flat result rows, and record a manifest that makes any row reproducible on
//! its own.
//!
//! Failures are data: a cell that errors (or panics) becomes a row whose
//! `status` holds the message and whose KPI columns stay empty, and the run
//! carries on. Rows are written in cell order regardless of the worker count,
//! so the same plan always produces byte-identical CSV.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cfplan_core::mrp::PlanningMode;
use cfplan_core::rolling::run_replication;
use cfplan_core::seeds::replication_seed;

use crate::plan::{expand, plan_from_parts, sim_config, ExperimentPlan, Scenario};

/// One (scenario, replication) result, flattened for CSV. The field order is
/// the CSV column order and is part of the output contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    /// scenario_id × replications + replication; the replay key.
    pub row_id: u64,
    pub scenario_id: u32,
    pub replication: u32,
    pub seed: u64,
    /// "ok" or the error that stopped this cell.
    pub status: String,
    pub system: String,
    pub alpha: f64,
    pub beta: f64,
    pub utilization: f64,
    pub demand_rate: f64,
    pub mode: PlanningMode,
    pub plt: Option<u32>,
    pub cf: Option<String>,
    pub fop: u32,
    pub safety_stock: f64,
    pub setup_cv: f64,
    pub run_length: u32,
    pub warmup: u32,
    pub periods: Option<u32>,
    pub cost_per_period: Option<f64>,
    pub fgi_cost: Option<f64>,
    pub wip_cost: Option<f64>,
    pub tardiness_cost: Option<f64>,
    pub service_level: Option<f64>,
    pub aplt_mean: Option<f64>,
    pub certificates: Option<u64>,
    pub max_cert_gap: Option<f64>,
}

impl ScenarioRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Run one cell to a row. Never returns an error: failures land in `status`.
pub fn run_row(
    plan: &ExperimentPlan,
    scenario: &Scenario,
    replication: u32,
    base_seed: u64,
) -> ScenarioRow {
    let f = &plan.file;
    let mut row = ScenarioRow {
        row_id: scenario.id as u64 * f.replications as u64 + replication as u64,
        scenario_id: scenario.id,
        replication,
        seed: replication_seed(base_seed, replication),
        status: "ok".into(),
        system: plan.system.name().to_string(),
        alpha: scenario.alpha,
        beta: scenario.beta,
        utilization: scenario.utilization,
        demand_rate: scenario.demand_rate,
        mode: scenario.mode,
        plt: scenario.plt,
        cf: scenario.cf.as_ref().map(|c| c.label()),
        fop: scenario.fop,
        safety_stock: scenario.safety_stock,
        setup_cv: f.setup_cv,
        run_length: f.run_length,
        warmup: f.warmup,
        periods: None,
        cost_per_period: None,
        fgi_cost: None,
        wip_cost: None,
        tardiness_cost: None,
        service_level: None,
        aplt_mean: None,
        certificates: None,
        max_cert_gap: None,
    };
    let config = sim_config(plan, scenario, replication, base_seed);
    let outcome = catch_unwind(AssertUnwindSafe(|| run_replication(config)));
    match outcome {
        Ok(Ok(out)) => {
            let k = &out.kpis;
            row.periods = Some(k.periods);
            row.cost_per_period = Some(k.cost_per_period);
            row.fgi_cost = Some(k.fgi_cost);
            row.wip_cost = Some(k.wip_cost);
            row.tardiness_cost = Some(k.tardiness_cost);
            row.service_level = Some(k.service_level);
            row.aplt_mean = Some(k.aplt_mean);
            row.certificates = Some(out.certificates_checked);
            row.max_cert_gap = Some(out.max_certificate_gap);
        }
        Ok(Err(e)) => row.status = format!("error: {e}"),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            row.status = format!("panic: {msg}");
        }
    }
    row
}

/// Run the whole grid. `workers` = 0 uses one worker per CPU. Rows come back
/// sorted by `row_id`, so output does not depend on scheduling.
pub fn run_grid(
    plan: &ExperimentPlan,
    base_seed: u64,
    workers: usize,
    progress: bool,
) -> Vec<ScenarioRow> {
    let scenarios = expand(plan);
    let reps = plan.file.replications;
    let cells: Vec<(u32, u32)> = scenarios
        .iter()
        .flat_map(|s| (0..reps).map(move |r| (s.id, r)))
        .collect();
    let total = cells.len() as u64;
    let done = AtomicU64::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    let mut rows: Vec<ScenarioRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(sid, rep)| {
                let row = run_row(plan, &scenarios[sid as usize], rep, base_seed);
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if progress && (n % 50 == 0 || n == total) {
                    eprintln!("  {n}/{total} cells");
                }
                row
            })
            .collect()
    });
    rows.sort_by_key(|r| r.row_id);
    rows
}

/// Serialize rows as CSV with a stable header.
pub fn rows_to_csv(rows: &[ScenarioRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("row serializes");
    }
    let bytes = w.into_inner().expect("csv buffer");
    String::from_utf8(bytes).expect("csv is utf-8")
}

pub fn rows_from_csv(text: &str) -> anyhow::Result<Vec<ScenarioRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Everything needed to reproduce a run: tool version, the plan and system
/// definitions verbatim, the effective base seed, and per-replication seeds.
/// `created_unix` is informational; all other fields are deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub plan_name: String,
    pub plan_sha256: String,
    pub plan_toml: String,
    pub system_text: String,
    pub base_seed: u64,
    pub scenarios: u32,
    pub replications: u32,
    pub replication_seeds: Vec<u64>,
    pub rows: u64,
    pub failures: u64,
    pub results_csv: String,
}

pub fn build_manifest(
    plan: &ExperimentPlan,
    base_seed: u64,
    rows: &[ScenarioRow],
    results_csv: &str,
) -> Manifest {
    let scenario_count = expand(plan).len() as u32;
    let reps = plan.file.replications;
    Manifest {
        tool: "cfplan".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        plan_name: plan.file.name.clone(),
        plan_sha256: sha256_hex(plan.source.as_bytes()),
        plan_toml: plan.source.clone(),
        system_text: plan.system_text.clone(),
        base_seed,
        scenarios: scenario_count,
        replications: reps,
        replication_seeds: (0..reps).map(|r| replication_seed(base_seed, r)).collect(),
        rows: rows.len() as u64,
        failures: rows.iter().filter(|r| !r.is_ok()).count() as u64,
        results_csv: results_csv.into(),
    }
}

/// Re-run a single cell from a manifest, without the original plan or system
/// files. The result is bit-identical to the row the original run produced.
pub fn replay_row(manifest: &Manifest, row_id: u64) -> anyhow::Result<ScenarioRow> {
    let plan = plan_from_parts(&manifest.plan_toml, &manifest.system_text)?;
    let reps = manifest.replications as u64;
    let scenario_id = (row_id / reps) as u32;
    let replication = (row_id % reps) as u32;
    let scenarios = expand(&plan);
    let scenario = scenarios
        .get(scenario_id as usize)
        .ok_or_else(|| anyhow::anyhow!("row {row_id} is out of range ({} rows)", manifest.rows))?;
    Ok(run_row(&plan, scenario, replication, manifest.base_seed))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
