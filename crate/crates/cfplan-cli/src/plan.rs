//! Experiment plans: a TOML schema for scenario grids and its expansion into
//! fully specified simulation configurations.
//!
//! A plan sweeps demand behaviors, utilization levels, and planning
//! parameters over one production system. The `plt` axis spawns backward-MRP
//! scenarios (one per planned lead time) and the `cf` axis spawns
//! optimizer-driven scenarios (one per clearing function); either axis may be
//! empty, but not both. Utilization levels are translated into per-item
//! demand rates against the system's bottleneck, so 0.80/0.85/0.90 on the
//! small bundled system give the calibrated 41.18/44.12/47.06 units.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use cfplan_core::cf::CfConfig;
use cfplan_core::demand::DemandParams;
use cfplan_core::format::{parse_system, write_system};
use cfplan_core::mrp::{PlanningMode, PlanningParams};
use cfplan_core::opt::OptimizerConfig;
use cfplan_core::rolling::SimConfig;
use cfplan_core::seeds::replication_seed;
use cfplan_core::system::{demand_rate_for_utilization, preset, ItemKind, ProductionSystem};

/// One demand behavior: the early-update and late-update shock magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

/// The swept axes. Every scenario takes one value from each non-mode axis;
/// `plt` and `cf` together form the mode axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Target bottleneck utilizations in (0, 1].
    pub utilization: Vec<f64>,
    /// Planned lead times for backward-MRP scenarios; empty = no MRP runs.
    #[serde(default)]
    pub plt: Vec<u32>,
    /// Clearing functions for optimizer scenarios; empty = no optimizer runs.
    #[serde(default)]
    pub cf: Vec<CfConfig>,
    /// Fixed-order-period window lengths.
    pub fop: Vec<u32>,
    /// Safety stock multipliers (units = multiplier × demand rate).
    pub safety_stock: Vec<f64>,
}

/// An experiment plan exactly as written in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub name: String,
    /// Bundled system name (`ps1`, `ps2`, ...) or path to a system file,
    /// relative to the plan file.
    pub system: String,
    pub replications: u32,
    pub run_length: u32,
    /// Leading periods excluded from every KPI.
    pub warmup: u32,
    pub base_seed: u64,
    /// Forecast horizon H in periods.
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    /// Coefficient of variation of machine setup times.
    #[serde(default)]
    pub setup_cv: f64,
    pub demand: Vec<DemandSpec>,
    pub grid: GridSpec,
}

fn default_horizon() -> u32 {
    10
}

/// A parsed, validated plan with its production system resolved.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub file: PlanFile,
    pub system: ProductionSystem,
    /// The plan's TOML source, embedded in manifests for self-contained replay.
    pub source: String,
    /// The resolved system definition, likewise embedded in manifests.
    pub system_text: String,
}

/// Parse and validate a plan file. The system reference is resolved against
/// the plan file's directory.
pub fn parse_plan(path: &Path) -> anyhow::Result<ExperimentPlan> {
    let source = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read plan file {}", path.display()))?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    parse_plan_str(&source, base_dir)
        .with_context(|| format!("invalid plan file {}", path.display()))
}

/// Parse and validate plan text; `base_dir` anchors a relative system path.
pub fn parse_plan_str(source: &str, base_dir: &Path) -> anyhow::Result<ExperimentPlan> {
    let file: PlanFile = toml::from_str(source)?;
    let system = resolve_system(&file.system, base_dir)?;
    let system_text = write_system(&system);
    build_plan(file, system, source.to_string(), system_text)
}

/// Rebuild a plan from manifest-embedded text: the plan TOML plus the system
/// definition it ran against, bypassing preset and path resolution.
pub fn plan_from_parts(plan_toml: &str, system_text: &str) -> anyhow::Result<ExperimentPlan> {
    let file: PlanFile = toml::from_str(plan_toml)?;
    let system =
        parse_system(system_text).context("embedded system definition does not parse")?;
    build_plan(file, system, plan_toml.to_string(), system_text.to_string())
}

fn resolve_system(spec: &str, base_dir: &Path) -> anyhow::Result<ProductionSystem> {
    if let Some(system) = preset(spec) {
        return Ok(system);
    }
    let path = base_dir.join(spec);
    let text = std::fs::read_to_string(&path).with_context(|| {
        format!("system {spec:?} is not a bundled preset and {} is not readable", path.display())
    })?;
    parse_system(&text).with_context(|| format!("invalid system file {}", path.display()))
}

fn build_plan(
    file: PlanFile,
    system: ProductionSystem,
    source: String,
    system_text: String,
) -> anyhow::Result<ExperimentPlan> {
    let plan = ExperimentPlan { file, system, source, system_text };
    validate_plan(&plan)?;
    Ok(plan)
}

fn validate_plan(plan: &ExperimentPlan) -> anyhow::Result<()> {
    let f = &plan.file;
    if f.name.trim().is_empty() {
        bail!("plan name must not be empty");
    }
    if f.replications < 1 {
        bail!("replications must be at least 1");
    }
    if f.run_length < 1 {
        bail!("run_length must be at least 1 period");
    }
    if f.warmup >= f.run_length {
        bail!("warmup ({}) must be shorter than run_length ({})", f.warmup, f.run_length);
    }
    if f.horizon < 1 {
        bail!("horizon must be at least 1 period");
    }
    if !f.setup_cv.is_finite() || f.setup_cv < 0.0 {
        bail!("setup_cv must be finite and nonnegative, got {}", f.setup_cv);
    }
    if f.demand.is_empty() {
        bail!("demand grid must not be empty");
    }
    for d in &f.demand {
        if !d.alpha.is_finite() || d.alpha < 0.0 || !d.beta.is_finite() || d.beta < 0.0 {
            bail!("demand shocks must be finite and nonnegative, got alpha {} beta {}", d.alpha, d.beta);
        }
    }
    let g = &f.grid;
    if g.utilization.is_empty() {
        bail!("utilization grid must not be empty");
    }
    if g.fop.is_empty() {
        bail!("fop grid must not be empty");
    }
    if g.safety_stock.is_empty() {
        bail!("safety_stock grid must not be empty");
    }
    if g.plt.is_empty() && g.cf.is_empty() {
        bail!("the grid needs at least one planning mode: a plt entry or a cf entry");
    }
    for &u in &g.utilization {
        if !(u > 0.0 && u <= 1.0) {
            bail!("utilization must lie in (0, 1], got {u}");
        }
        let x = demand_rate_for_utilization(&plan.system, u);
        if !(x.is_finite() && x > 0.0) {
            bail!("utilization {u} leaves no processing capacity after setups (rate {x})");
        }
    }
    for &plt in &g.plt {
        if plt < 1 {
            bail!("planned lead time must be at least 1 period");
        }
    }
    for &fop in &g.fop {
        if fop < 1 {
            bail!("fop must be at least 1 period");
        }
    }
    for &ss in &g.safety_stock {
        if !ss.is_finite() || ss < 0.0 {
            bail!("safety stock multiplier must be finite and nonnegative, got {ss}");
        }
    }
    // A clearing function must fit every machine it will be built for.
    for cf in &g.cf {
        for r in plan.system.resources() {
            cf.build(r.capacity_minutes).map_err(|e| {
                anyhow!("clearing function {} rejected for machine {}: {e}", cf.label(), r.id)
            })?;
        }
    }
    Ok(())
}

/// One fully specified point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Position in expansion order; stable for a given plan.
    pub id: u32,
    pub alpha: f64,
    pub beta: f64,
    pub utilization: f64,
    /// Per-item demand rate realizing the target utilization.
    pub demand_rate: f64,
    pub mode: PlanningMode,
    /// Planned lead time; meaningful in backward mode only.
    pub plt: Option<u32>,
    /// Clearing function; present in optimizer mode only.
    pub cf: Option<CfConfig>,
    pub fop: u32,
    pub safety_stock: f64,
}

/// Expand a plan into scenarios: demand × utilization × (plt entries, then cf
/// entries) × fop × safety stock, in that nesting order.
pub fn expand(plan: &ExperimentPlan) -> Vec<Scenario> {
    let g = &plan.file.grid;
    let mut out = Vec::new();
    let mut id = 0u32;
    let mut push = |id: &mut u32,
                    d: &DemandSpec,
                    util: f64,
                    rate: f64,
                    mode: PlanningMode,
                    plt: Option<u32>,
                    cf: Option<CfConfig>,
                    fop: u32,
                    ss: f64| {
        out.push(Scenario {
            id: *id,
            alpha: d.alpha,
            beta: d.beta,
            utilization: util,
            demand_rate: rate,
            mode,
            plt,
            cf,
            fop,
            safety_stock: ss,
        });
        *id += 1;
    };
    for d in &plan.file.demand {
        for &util in &g.utilization {
            let rate = demand_rate_for_utilization(&plan.system, util);
            for &plt in &g.plt {
                for &fop in &g.fop {
                    for &ss in &g.safety_stock {
                        push(&mut id, d, util, rate, PlanningMode::MrpBackward, Some(plt), None, fop, ss);
                    }
                }
            }
            for cf in &g.cf {
                for &fop in &g.fop {
                    for &ss in &g.safety_stock {
                        push(&mut id, d, util, rate, PlanningMode::CfOptimized, None, Some(cf.clone()), fop, ss);
                    }
                }
            }
        }
    }
    out
}

/// The simulation configuration for one (scenario, replication) cell.
/// Replication seeds depend only on the base seed and the replication index,
/// so every scenario sees the same demand and setup streams per replication.
pub fn sim_config(
    plan: &ExperimentPlan,
    scenario: &Scenario,
    replication: u32,
    base_seed: u64,
) -> SimConfig {
    let f = &plan.file;
    let end_items = plan
        .system
        .items()
        .iter()
        .filter(|i| i.kind == ItemKind::EndItem)
        .map(|i| i.id);
    SimConfig {
        system: plan.system.clone(),
        demand: DemandParams {
            rates: end_items.map(|g| (g, scenario.demand_rate)).collect(),
            horizon: f.horizon,
            alpha: scenario.alpha,
            beta: scenario.beta,
        },
        planning: PlanningParams {
            planned_lead_time: scenario.plt.unwrap_or(1),
            safety_stock_multiplier: scenario.safety_stock,
            fop: scenario.fop,
            mode: scenario.mode,
            ..PlanningParams::default()
        },
        cf: scenario.cf.clone().unwrap_or(CfConfig::Ideal),
        optimizer: OptimizerConfig::default(),
        setup_cv: f.setup_cv,
        run_length: f.run_length,
        warmup: f.warmup,
        seed: replication_seed(base_seed, replication),
    }
}
