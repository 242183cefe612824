//! Rolling-horizon coordination: the per-period cycle that drives a whole
//! simulation run.
//!
//! Each period, in this order: advance the demand forecasts one period,
//! regenerate the material plan (backward-scheduled or optimizer-scheduled
//! releases), hand orders whose release period arrived to the shop floor,
//! advance the floor one period of simulated time, fulfill end-item demand
//! due this period from finished stock, and accrue holding and backorder
//! costs on the end-of-period state. Orders are frozen once released;
//! everything else is replanned from scratch next period.
//!
//! Randomness discipline: the demand process and the setup-time process draw
//! from separate streams derived from the one replication seed, so switching
//! the planning mode (or any planning parameter) leaves the demand trace
//! bit-identical and the setup draws on each machine following the same
//! sequence. Paired comparisons between planning policies therefore see the
//! same world.
//!
//! Cost accounting runs on end-of-period state: finished stock at its
//! holding rate, lots on the floor at their WIP rate, and unmet end-item
//! demand at its backorder rate, each per unit per period. Lots waiting for
//! components hold no value of their own yet; their inputs still sit in
//! component stock and are costed there.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::cf::CfConfig;
use crate::demand::{DemandParams, ForecastProvider, ForecastSet};
use crate::mrp::{mrp_plan, OpenOrder, PlanningMode, PlanningParams, PlanningState};
use crate::opt::{CfOptimizer, OptimizerConfig};
use crate::shopfloor::{Floor, ReleaseOutcome, PERIOD_MINUTES};
use crate::system::{ItemId, ItemKind, ProductionSystem};
use crate::{Error, Result};

/// Fill-rate target the backorder rate must encode: backorder cost per unit
/// per period = holding rate × target / (1 − target). With end-item holding
/// at 2 per unit-period this gives the standard 38.
const TARGET_FILL_RATE: f64 = 0.95;

/// Unit-quantity dust tolerance, matching the floor's stock accounting.
const EPS: f64 = 1e-9;

/// Everything one replication needs: the physical system, the demand
/// process, planning policy, clearing-function choice, run protocol, and the
/// replication seed.
///
/// The driver derives two values itself rather than trusting the inputs: the
/// planning grid is stretched to forecast horizon + the longest release
/// lead, and the optimizer's tie exploration is switched off (any cost-equal
/// optimum is fine at simulation scale).
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub system: ProductionSystem,
    pub demand: DemandParams,
    pub planning: PlanningParams,
    /// Clearing-function shape used when planning mode is cf-optimized.
    pub cf: CfConfig,
    pub optimizer: OptimizerConfig,
    /// Coefficient of variation of machine setup times (0 = deterministic).
    pub setup_cv: f64,
    /// Total simulated periods.
    pub run_length: u32,
    /// Leading periods excluded from the KPI summary.
    pub warmup: u32,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.planning.validate()?;
        if self.run_length < 1 {
            return Err(Error::Validation("run length must be at least 1 period".into()));
        }
        if self.warmup >= self.run_length {
            return Err(Error::Validation(format!(
                "warmup ({}) must be shorter than the run ({})",
                self.warmup, self.run_length
            )));
        }
        if !self.setup_cv.is_finite() || self.setup_cv < 0.0 {
            return Err(Error::Validation("setup cv must be finite and nonnegative".into()));
        }
        let end_items: Vec<ItemId> = self
            .system
            .items()
            .iter()
            .filter(|i| i.kind == ItemKind::EndItem)
            .map(|i| i.id)
            .collect();
        for &g in &end_items {
            match self.demand.rates.get(&g) {
                Some(x) if x.is_finite() && *x > 0.0 => {}
                Some(_) => {
                    return Err(Error::Validation(format!(
                        "demand rate for end item {g} must be positive and finite"
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "end item {g} has no demand rate configured"
                    )))
                }
            }
        }
        for &g in self.demand.rates.keys() {
            if !end_items.contains(&g) {
                return Err(Error::Validation(format!(
                    "demand rate configured for item {g}, which is not an end item"
                )));
            }
        }
        // The backorder rate must encode the target fill rate relative to the
        // holding rate (newsvendor critical ratio), or cost comparisons
        // against the tardiness KPI stop meaning anything.
        let factor = TARGET_FILL_RATE / (1.0 - TARGET_FILL_RATE);
        for item in self.system.items() {
            if item.kind != ItemKind::EndItem {
                continue;
            }
            let expected = item.cost_fgi * factor;
            if (item.cost_backlog - expected).abs() > 1e-9 * expected.max(1.0) {
                return Err(Error::Validation(format!(
                    "end item {} backorder rate {} does not encode a {:.0}% fill target \
                     (expected {} = {} × {})",
                    item.id,
                    item.cost_backlog,
                    TARGET_FILL_RATE * 100.0,
                    expected,
                    item.cost_fgi,
                    factor
                )));
            }
        }
        Ok(())
    }

    /// Planning parameters as the driver actually runs them: the grid covers
    /// the forecast horizon plus the longest lead any release can take.
    fn effective_planning(&self) -> PlanningParams {
        let lead = self.optimizer.max_lead.max(self.planning.planned_lead_time);
        PlanningParams { planning_horizon: self.demand.horizon + lead, ..self.planning }
    }

    fn effective_optimizer(&self) -> OptimizerConfig {
        let mut optimizer = self.optimizer.clone();
        // Tie chasing only pins which cost-equal optimum gets reported; over
        // hundreds of solves per run it costs real time and changes nothing
        // the floor can observe.
        optimizer.limits.tie_exploration_nodes = 0;
        optimizer
    }
}

/// End-of-period cost accrual split by category, per unit per period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    /// Finished stock (end items and components) at each item's holding rate.
    pub fgi: f64,
    /// Lots queued or in process at each item's WIP rate.
    pub wip: f64,
    /// Unmet end-item demand at the backorder rate.
    pub tardiness: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fgi + self.wip + self.tardiness
    }
}

/// Everything observed in one period: end-of-period state per item, demand
/// fulfillment split on-time/late, the release decisions taken, and costs.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: u32,
    /// Finished stock per producible item at period end.
    pub end_fgi: BTreeMap<ItemId, f64>,
    /// Units queued or in process per item at period end.
    pub end_wip: BTreeMap<ItemId, f64>,
    /// Unmet demand per end item at period end (components never backlog).
    pub end_backlog: BTreeMap<ItemId, f64>,
    /// End-item demand that came due this period.
    pub demand_units: f64,
    /// Units delivered in their due period.
    pub on_time_units: f64,
    /// Units delivered after their due period.
    pub late_units: f64,
    /// `(item, due − release)` for every order released this period.
    pub releases: Vec<(ItemId, u32)>,
    /// Releases that had to wait for component stock on entry.
    pub deferred_releases: u32,
    pub costs: CostBreakdown,
}

impl PeriodRecord {
    pub fn fgi_units(&self) -> f64 {
        self.end_fgi.values().sum()
    }

    pub fn wip_units(&self) -> f64 {
        self.end_wip.values().sum()
    }

    pub fn backlog_units(&self) -> f64 {
        self.end_backlog.values().sum()
    }
}

/// Per-period record stream as delimited text, one row per period.
pub fn write_period_records(records: &[PeriodRecord]) -> String {
    let mut out = String::from(
        "period,demand,on_time,late,fgi_units,wip_units,backlog_units,\
         orders_released,deferred,fgi_cost,wip_cost,tardiness_cost,total_cost\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.period,
            r.demand_units,
            r.on_time_units,
            r.late_units,
            r.fgi_units(),
            r.wip_units(),
            r.backlog_units(),
            r.releases.len(),
            r.deferred_releases,
            r.costs.fgi,
            r.costs.wip,
            r.costs.tardiness,
            r.costs.total()
        );
    }
    out
}

/// Post-warmup averages for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiSummary {
    /// Periods the averages cover (run length − warmup).
    pub periods: u32,
    /// Mean total cost per period; always the sum of the three categories.
    pub cost_per_period: f64,
    pub fgi_cost: f64,
    pub wip_cost: f64,
    pub tardiness_cost: f64,
    /// Fraction of end-item demand delivered in its due period.
    pub service_level: f64,
    /// Mean `due − release` over all orders released post-warmup.
    pub aplt_mean: f64,
}

impl KpiSummary {
    pub const CSV_HEADER: &'static str =
        "periods,cost_per_period,fgi_cost,wip_cost,tardiness_cost,service_level,aplt_mean";

    pub fn from_records(records: &[PeriodRecord], warmup: u32) -> Result<Self> {
        let post: Vec<&PeriodRecord> = records.iter().filter(|r| r.period > warmup).collect();
        if post.is_empty() {
            return Err(Error::Validation(format!(
                "no periods left after a warmup of {warmup}"
            )));
        }
        let n = post.len() as f64;
        let fgi_cost = post.iter().map(|r| r.costs.fgi).sum::<f64>() / n;
        let wip_cost = post.iter().map(|r| r.costs.wip).sum::<f64>() / n;
        let tardiness_cost = post.iter().map(|r| r.costs.tardiness).sum::<f64>() / n;
        let demand: f64 = post.iter().map(|r| r.demand_units).sum();
        let on_time: f64 = post.iter().map(|r| r.on_time_units).sum();
        let service_level = if demand > 0.0 { on_time / demand } else { 1.0 };
        let allowances: Vec<u32> =
            post.iter().flat_map(|r| r.releases.iter().map(|&(_, a)| a)).collect();
        let aplt_mean = if allowances.is_empty() {
            0.0
        } else {
            allowances.iter().map(|&a| a as f64).sum::<f64>() / allowances.len() as f64
        };
        Ok(Self {
            periods: post.len() as u32,
            cost_per_period: fgi_cost + wip_cost + tardiness_cost,
            fgi_cost,
            wip_cost,
            tardiness_cost,
            service_level,
            aplt_mean,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.periods,
            self.cost_per_period,
            self.fgi_cost,
            self.wip_cost,
            self.tardiness_cost,
            self.service_level,
            self.aplt_mean
        )
    }
}

/// One replication in progress: forecasts, the shop floor, the open backlog
/// per end item, and running totals used for conservation checks.
pub struct RollingSimulation {
    config: SimConfig,
    planning: PlanningParams,
    optimizer: OptimizerConfig,
    forecasts: ForecastProvider,
    floor: Floor,
    /// FIFO unmet demand per end item: (due period, remaining units).
    backorders: BTreeMap<ItemId, VecDeque<(u32, f64)>>,
    next_order_id: u64,
    records: Vec<PeriodRecord>,
    initial_stock: BTreeMap<ItemId, f64>,
    cum_released: BTreeMap<ItemId, f64>,
    cum_completed: BTreeMap<ItemId, f64>,
    cum_delivered: BTreeMap<ItemId, f64>,
    cum_demand: BTreeMap<ItemId, f64>,
    certificates_checked: u64,
    max_certificate_gap: f64,
}

impl RollingSimulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let planning = config.effective_planning();
        let optimizer = config.effective_optimizer();
        let forecasts = ForecastProvider::Mmfe(ForecastSet::init(
            config.demand.clone(),
            config.demand.horizon,
            config.seed,
        )?);
        let floor = Floor::new(&config.system, config.seed, config.setup_cv)?;
        let initial_stock = floor.stocks().clone();
        let backorders = config
            .system
            .items()
            .iter()
            .filter(|i| i.kind == ItemKind::EndItem)
            .map(|i| (i.id, VecDeque::new()))
            .collect();
        Ok(Self {
            config,
            planning,
            optimizer,
            forecasts,
            floor,
            backorders,
            next_order_id: 1,
            records: Vec::new(),
            initial_stock,
            cum_released: BTreeMap::new(),
            cum_completed: BTreeMap::new(),
            cum_delivered: BTreeMap::new(),
            cum_demand: BTreeMap::new(),
            certificates_checked: 0,
            max_certificate_gap: 0.0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Last completed period (0 before the first step).
    pub fn now(&self) -> u32 {
        self.forecasts.now()
    }

    pub fn floor(&self) -> &Floor {
        &self.floor
    }

    pub fn forecasts(&self) -> &ForecastProvider {
        &self.forecasts
    }

    pub fn records(&self) -> &[PeriodRecord] {
        &self.records
    }

    /// Optimizer certificates audited so far (0 in backward mode).
    pub fn certificates_checked(&self) -> u64 {
        self.certificates_checked
    }

    pub fn max_certificate_gap(&self) -> f64 {
        self.max_certificate_gap
    }

    pub fn backlog_units(&self, item: ItemId) -> f64 {
        self.backorders.get(&item).map_or(0.0, |q| q.iter().map(|e| e.1).sum())
    }

    /// Run one full period and return its record. On error the period is not
    /// committed: no record is appended and no orders are released.
    pub fn step_period(&mut self) -> Result<PeriodRecord> {
        let t = self.forecasts.now() + 1;

        // (1) The next due comes into being; forecasts now speak from t.
        self.forecasts.advance_one_period()?;

        // (2) Replan everything not yet released.
        let state = self.planning_state(t);
        let plan = match self.planning.mode {
            PlanningMode::MrpBackward => {
                mrp_plan(&state, &self.forecasts, &self.planning, &self.config.system, None)?
            }
            PlanningMode::CfOptimized => {
                let mut opt = CfOptimizer::new(
                    &self.config.system,
                    self.config.cf.clone(),
                    self.optimizer.clone(),
                );
                let plan = mrp_plan(
                    &state,
                    &self.forecasts,
                    &self.planning,
                    &self.config.system,
                    Some(&mut opt),
                )?;
                for (rid, cert) in opt.take_certificates() {
                    eprintln!("TRACE t {t} {rid} nodes {} gap {}", cert.nodes_explored, cert.gap);
                    self.certificates_checked += 1;
                    self.max_certificate_gap = self.max_certificate_gap.max(cert.gap);
                }
                plan
            }
        };

        // (3) Release orders whose period arrived, earliest due first. Lots
        // deferred in earlier periods get first claim on component stock.
        self.floor.retry_deferred();
        let mut releases = Vec::new();
        let mut deferred_releases = 0u32;
        for order in plan.due_for_release() {
            let id = self.next_order_id;
            self.next_order_id += 1;
            let outcome =
                self.floor.release(id, order.item, order.quantity, order.due_period, t)?;
            if outcome == ReleaseOutcome::Deferred {
                deferred_releases += 1;
            }
            releases.push((order.item, order.due_period - t));
            *self.cum_released.entry(order.item).or_insert(0.0) += order.quantity;
        }

        // (4) One period of floor time.
        let completions = self.floor.advance_to(t as f64 * PERIOD_MINUTES)?;
        for lot in &completions {
            *self.cum_completed.entry(lot.item).or_insert(0.0) += lot.quantity;
        }

        // (5) Serve end-item demand due this period, oldest dues first.
        let mut demand_units = 0.0;
        let mut on_time_units = 0.0;
        let mut late_units = 0.0;
        let end_items: Vec<ItemId> = self.backorders.keys().copied().collect();
        for g in end_items {
            let due_now = self.forecasts.realized_demand(g, t)?;
            demand_units += due_now;
            *self.cum_demand.entry(g).or_insert(0.0) += due_now;
            let queue = self.backorders.get_mut(&g).expect("end item ledger exists");
            if due_now > 0.0 {
                queue.push_back((t, due_now));
            }
            let mut available = self.floor.stock(g);
            let mut withdrawn = 0.0;
            while available > EPS {
                let Some(front) = queue.front_mut() else { break };
                let served = front.1.min(available);
                available -= served;
                withdrawn += served;
                if front.0 == t {
                    on_time_units += served;
                } else {
                    late_units += served;
                }
                if front.1 - served <= EPS {
                    queue.pop_front();
                } else {
                    front.1 -= served;
                }
            }
            if withdrawn > 0.0 {
                self.floor.withdraw(g, withdrawn)?;
                *self.cum_delivered.entry(g).or_insert(0.0) += withdrawn;
            }
        }

        // (6) Cost the end-of-period state.
        let costs = self.accrue_costs();
        let end_backlog =
            self.backorders.keys().map(|&g| (g, self.backlog_units(g))).collect();
        let record = PeriodRecord {
            period: t,
            end_fgi: self.floor.stocks().clone(),
            end_wip: self.floor.wip_units(),
            end_backlog,
            demand_units,
            on_time_units,
            late_units,
            releases,
            deferred_releases,
            costs,
        };
        self.verify_conservation()?;
        self.records.push(record.clone());
        Ok(record)
    }

    /// Cost the current end-of-period state by category.
    pub fn accrue_costs(&self) -> CostBreakdown {
        let item = |g: ItemId| self.config.system.item(g).expect("validated system item");
        let mut costs = CostBreakdown::default();
        for (&g, &quantity) in self.floor.stocks() {
            costs.fgi += quantity * item(g).cost_fgi;
        }
        for (g, quantity) in self.floor.wip_units() {
            costs.wip += quantity * item(g).cost_wip;
        }
        for &g in self.backorders.keys() {
            costs.tardiness += self.backlog_units(g) * item(g).cost_backlog;
        }
        costs
    }

    /// Audit the books against the floor: released − completed = on-floor,
    /// stock balances close item by item, and end-item backlog equals demand
    /// minus deliveries.
    pub fn verify_conservation(&self) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()));
        let wip = self.floor.wip_units();
        let mut waiting: BTreeMap<ItemId, f64> = BTreeMap::new();
        for order in self.floor.deferred_orders() {
            *waiting.entry(order.item).or_insert(0.0) += order.quantity;
        }
        let entered = |g: ItemId| {
            self.cum_released.get(&g).copied().unwrap_or(0.0)
                - waiting.get(&g).copied().unwrap_or(0.0)
        };
        for item in self.config.system.items() {
            if item.kind == ItemKind::RawMaterial {
                continue;
            }
            let g = item.id;
            let released = self.cum_released.get(&g).copied().unwrap_or(0.0);
            let completed = self.cum_completed.get(&g).copied().unwrap_or(0.0);
            let on_floor =
                wip.get(&g).copied().unwrap_or(0.0) + waiting.get(&g).copied().unwrap_or(0.0);
            if !close(released - completed, on_floor) {
                return Err(Error::Simulation(format!(
                    "item {g}: released {released} − completed {completed} ≠ on-floor {on_floor}"
                )));
            }
            let outflow = match item.kind {
                ItemKind::EndItem => self.cum_delivered.get(&g).copied().unwrap_or(0.0),
                ItemKind::Component => self
                    .config
                    .system
                    .parents(g)
                    .iter()
                    .map(|&(parent, per)| per * entered(parent))
                    .sum(),
                ItemKind::RawMaterial => unreachable!(),
            };
            let expected =
                self.initial_stock.get(&g).copied().unwrap_or(0.0) + completed - outflow;
            let stock = self.floor.stock(g);
            if !close(stock, expected) {
                return Err(Error::Simulation(format!(
                    "item {g}: stock {stock} ≠ initial + completed − outflow = {expected}"
                )));
            }
            if item.kind == ItemKind::EndItem {
                let owed = self.cum_demand.get(&g).copied().unwrap_or(0.0)
                    - self.cum_delivered.get(&g).copied().unwrap_or(0.0);
                let backlog = self.backlog_units(g);
                if !close(owed, backlog) {
                    return Err(Error::Simulation(format!(
                        "item {g}: demand − delivered = {owed} ≠ backlog {backlog}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Snapshot the floor and ledgers into the planner's input.
    fn planning_state(&self, now: u32) -> PlanningState {
        let mut open_orders = Vec::new();
        for order in self.floor.active_orders() {
            open_orders.push(OpenOrder {
                item: order.item,
                quantity: order.quantity,
                due_period: order.due_period,
                release_period: order.release_period,
                deferred: false,
            });
        }
        for order in self.floor.deferred_orders() {
            open_orders.push(OpenOrder {
                item: order.item,
                quantity: order.quantity,
                due_period: order.due_period,
                release_period: order.release_period,
                deferred: true,
            });
        }
        let backlog =
            self.backorders.keys().map(|&g| (g, self.backlog_units(g))).collect();
        PlanningState {
            now,
            on_hand: self.floor.stocks().clone(),
            backlog,
            open_orders,
            end_rates: self.config.demand.rates.clone(),
        }
    }
}

/// KPI summary plus the full per-period record stream for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub kpis: KpiSummary,
    pub records: Vec<PeriodRecord>,
    /// Solver certificates verified over the whole run (0 in backward mode).
    pub certificates_checked: u64,
    /// Largest verified optimality gap among those certificates.
    pub max_certificate_gap: f64,
}

/// Run one full replication: `run_length` periods, KPIs over the post-warmup
/// stretch. Bit-reproducible for a given config and seed.
pub fn run_replication(config: SimConfig) -> Result<ReplicationOutput> {
    let mut sim = RollingSimulation::new(config)?;
    for _ in 0..sim.config.run_length {
        sim.step_period()?;
    }
    let kpis = KpiSummary::from_records(&sim.records, sim.config.warmup)?;
    Ok(ReplicationOutput {
        kpis,
        records: sim.records,
        certificates_checked: sim.certificates_checked,
        max_certificate_gap: sim.max_certificate_gap,
    })
}
