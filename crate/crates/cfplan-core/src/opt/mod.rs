//! Release-date optimization for orders sharing one resource.
//!
//! The model decides, for every lot-sized order, in which period of its
//! release window it enters the floor. A clearing function couples the
//! period's attainable output to its workload, so releases spread out when
//! congestion would otherwise build up. Minimized are inventory, WIP, and
//! backlog holding costs plus a prohibitively priced overload term that
//! keeps the model feasible when demand outruns capacity.
//!
//! `solve` runs branch and bound with an exact LP relaxation per node
//! ([`lp`], [`bb`]). `brute_force_oracle` answers the same question for tiny
//! instances by full enumeration over an independently written simplex
//! ([`oracle`], [`simplex`]); the two routes share no solver code and
//! cross-check each other in tests. `verify_certificate` replays every
//! constraint from a returned plan without consulting any LP.

mod bb;
mod dump;
mod lp;
mod oracle;
mod simplex;
#[cfg(test)]
mod tests;
mod verify;

pub use dump::{dump_instance, parse_instance};
pub use oracle::{brute_force_argmin, brute_force_oracle};
pub use verify::verify_certificate;

use std::collections::BTreeMap;
use std::time::Duration;

use crate::cf::{CfConfig, ClearingFunction};
use crate::mrp::{PlannedOrder, ReleaseScheduler, ResourceScheduleInput};
use crate::system::{ItemId, ProductionSystem};
use crate::{Error, Result};

/// Factor applied to the summed inventory holding rates to price overload
/// far above any plausible holding or backlog cost.
pub const OVERLOAD_PENALTY_FACTOR: f64 = 1000.0;

/// One order to be placed: quantity owed at the due period.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderSpec {
    pub id: u64,
    pub item: ItemId,
    pub quantity: f64,
    /// Absolute due period.
    pub due: u32,
}

/// Per-item model data: physical parameters, costs, initial state, and the
/// gross demand schedule the item must serve over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemData {
    pub id: ItemId,
    /// Minutes per unit on the shared resource.
    pub processing_time: f64,
    /// Minutes charged once per released order.
    pub setup_time: f64,
    pub cost_fgi: f64,
    pub cost_wip: f64,
    pub cost_backlog: f64,
    pub initial_fgi: f64,
    pub initial_backlog: f64,
    pub initial_wip: f64,
    /// Units owed per grid period (index 0 = first grid period).
    pub demand: Vec<f64>,
}

/// A complete, validated model instance over one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseModelInstance {
    start_period: u32,
    horizon: usize,
    items: Vec<ItemData>,
    orders: Vec<OrderSpec>,
    max_lead: u32,
    release_until_due: bool,
    cf: ClearingFunction,
    overload_penalty: f64,
    /// Grid-relative inclusive release windows per order, aligned with `orders`.
    windows: Vec<(usize, usize)>,
}

impl ReleaseModelInstance {
    /// Validates and indexes an instance. Orders are sorted by (item, due,
    /// id) so consecutive orders of an item are due-ordered, which the
    /// no-overtaking constraint relies on. The overload penalty is fixed at
    /// 1000 × the summed FGI holding rates of the instance's items.
    pub fn new(
        start_period: u32,
        horizon: usize,
        items: Vec<ItemData>,
        orders: Vec<OrderSpec>,
        max_lead: u32,
        release_until_due: bool,
        cf: ClearingFunction,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Validation("horizon must be at least 1 period".into()));
        }
        if items.is_empty() {
            return Err(Error::Validation("instance needs at least one item".into()));
        }
        if max_lead == 0 {
            return Err(Error::Validation("max release lead must be at least 1".into()));
        }
        let mut items = items;
        items.sort_by_key(|i| i.id);
        for pair in items.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Validation(format!("duplicate item {}", pair[0].id)));
            }
        }
        for item in &items {
            if item.demand.len() != horizon {
                return Err(Error::Validation(format!(
                    "item {}: demand schedule length {} != horizon {horizon}",
                    item.id,
                    item.demand.len()
                )));
            }
            if item.processing_time <= 0.0 || item.setup_time < 0.0 {
                return Err(Error::Validation(format!(
                    "item {}: processing must be positive, setup nonnegative",
                    item.id
                )));
            }
            let state_ok = item.initial_fgi >= 0.0
                && item.initial_backlog >= 0.0
                && item.initial_wip >= 0.0
                && item.demand.iter().all(|&x| x >= 0.0);
            if !state_ok {
                return Err(Error::Validation(format!(
                    "item {}: negative quantity in initial state or demand",
                    item.id
                )));
            }
            if item.cost_fgi < 0.0 || item.cost_wip < 0.0 || item.cost_backlog < 0.0 {
                return Err(Error::Validation(format!("item {}: negative cost rate", item.id)));
            }
        }
        let item_ids: Vec<ItemId> = items.iter().map(|i| i.id).collect();
        let mut orders = orders;
        orders.sort_by_key(|o| (o.item, o.due, o.id));
        for pair in orders.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Validation(format!("duplicate order id {}", pair[0].id)));
            }
        }
        let end = start_period + horizon as u32 - 1;
        let upper_slack = u32::from(release_until_due);
        let mut windows = Vec::with_capacity(orders.len());
        for o in &orders {
            if !item_ids.contains(&o.item) {
                return Err(Error::Validation(format!(
                    "order {}: item {} not part of the instance",
                    o.id, o.item
                )));
            }
            if o.quantity < 0.0 {
                return Err(Error::Validation(format!("order {}: negative quantity", o.id)));
            }
            if o.due < start_period || o.due > end {
                return Err(Error::Validation(format!(
                    "order {}: due {} outside horizon [{start_period}, {end}]",
                    o.id, o.due
                )));
            }
            let due_idx = (o.due - start_period) as usize;
            let lo = due_idx.saturating_sub(max_lead as usize);
            let hi_abs = due_idx as i64 - 1 + i64::from(upper_slack);
            let hi = hi_abs.min(horizon as i64 - 1);
            if hi < lo as i64 {
                return Err(Error::Validation(format!(
                    "order {}: release window [{}, {hi_abs}] does not intersect the horizon",
                    o.id,
                    lo as i64
                )));
            }
            windows.push((lo, hi as usize));
        }
        let overload_penalty =
            OVERLOAD_PENALTY_FACTOR * items.iter().map(|i| i.cost_fgi).sum::<f64>();
        Ok(Self {
            start_period,
            horizon,
            items,
            orders,
            max_lead,
            release_until_due,
            cf,
            overload_penalty,
            windows,
        })
    }

    pub fn start_period(&self) -> u32 {
        self.start_period
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn items(&self) -> &[ItemData] {
        &self.items
    }

    pub fn orders(&self) -> &[OrderSpec] {
        &self.orders
    }

    pub fn max_lead(&self) -> u32 {
        self.max_lead
    }

    pub fn release_until_due(&self) -> bool {
        self.release_until_due
    }

    pub fn cf(&self) -> &ClearingFunction {
        &self.cf
    }

    pub fn capacity(&self) -> f64 {
        self.cf.capacity()
    }

    pub fn overload_penalty(&self) -> f64 {
        self.overload_penalty
    }

    /// Grid-relative inclusive release window of order index `j`.
    pub fn window(&self, j: usize) -> (usize, usize) {
        self.windows[j]
    }

    /// Release decision variables in the model: one per order and candidate
    /// period.
    pub fn binary_variable_count(&self) -> usize {
        self.windows.iter().map(|(lo, hi)| hi - lo + 1).sum()
    }

    /// Continuous variables in the model template: five trajectories per
    /// item (releases, WIP, FGI, backlog, production) and three per period
    /// (load, processed load, overload), each over every period. The LP
    /// assembly substitutes the release trajectory out, but the model is
    /// stated, counted, and verified with it.
    pub fn continuous_variable_count(&self) -> usize {
        self.horizon * (5 * self.items.len() + 3)
    }

    pub(crate) fn item_index(&self, id: ItemId) -> usize {
        self.items.binary_search_by_key(&id, |i| i.id).expect("validated item id")
    }

    /// Orders of one item in due order, as indices into `orders`.
    pub(crate) fn orders_of(&self, item: ItemId) -> Vec<usize> {
        (0..self.orders.len()).filter(|&j| self.orders[j].item == item).collect()
    }
}

/// Solver budgets. Node and tie budgets are deterministic limits; the wall
/// clock limit is an escape hatch that can make results machine-dependent
/// and is off by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveLimits {
    pub max_nodes: usize,
    /// While fewer nodes than this have been explored, the search keeps
    /// visiting nodes whose bound ties the incumbent to prefer later
    /// releases among cost-equal optima.
    pub tie_exploration_nodes: usize,
    pub time_limit: Option<Duration>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self { max_nodes: 20_000, tie_exploration_nodes: 200, time_limit: None }
    }
}

/// Per-item solved trajectories over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemTrajectory {
    pub releases: Vec<f64>,
    pub wip: Vec<f64>,
    pub inventory: Vec<f64>,
    pub backlog: Vec<f64>,
    pub production: Vec<f64>,
}

/// The optimizer's answer: release periods plus the full solved state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleasePlan {
    /// Order id → absolute release period.
    pub releases: BTreeMap<u64, u32>,
    pub trajectories: BTreeMap<ItemId, ItemTrajectory>,
    pub load: Vec<f64>,
    pub processed_load: Vec<f64>,
    pub overload: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertStatus {
    Optimal,
    WithinGap,
}

/// Proof obligations for a solve: how good the incumbent is and how cleanly
/// it satisfies the model. `verify_certificate` rechecks everything from
/// scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveCertificate {
    pub status: CertStatus,
    /// (objective − dual bound) / max(1, |objective|).
    pub gap: f64,
    /// Best lower bound on the optimum proved by the search.
    pub lp_dual_bound: f64,
    /// Maximum scaled constraint residual of the returned plan, as measured
    /// by the solver. Verification recomputes these independently.
    pub max_residual: f64,
    pub nodes_explored: usize,
}

/// Exact minimization of the release model. Deterministic for a given
/// instance and limits unless a wall-clock limit interrupts the search.
pub fn solve(
    instance: &ReleaseModelInstance,
    limits: &SolveLimits,
) -> Result<(ReleasePlan, SolveCertificate)> {
    bb::branch_and_bound(instance, limits)
}

/// Settings for using the optimizer inside planning.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Longest allowed release lead l: windows start at due − l.
    pub max_lead: u32,
    /// Allow release in the due period itself. Off by default: the last
    /// candidate is due − 1, so a release always precedes its due period.
    pub release_until_due: bool,
    /// Backlog rate for component items inside the model, which carry no
    /// backlog cost in the cost accounting proper but need one here so the
    /// model trades lateness against holding sensibly.
    pub component_backlog_penalty: f64,
    pub limits: SolveLimits,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_lead: 4,
            release_until_due: false,
            component_backlog_penalty: 38.0,
            limits: SolveLimits::default(),
        }
    }
}

/// Builds an instance from one resource's planning inputs: the items routed
/// on the resource (with state and gross demand), the unreleased orders to
/// place, and the clearing function for the resource's capacity.
pub fn build_instance(
    input: &ResourceScheduleInput<'_>,
    orders: &[PlannedOrder],
    system: &ProductionSystem,
    cf: &ClearingFunction,
    config: &OptimizerConfig,
) -> Result<ReleaseModelInstance> {
    let mut items = Vec::new();
    for (&id, st) in &input.item_states {
        let item = system
            .item(id)
            .ok_or_else(|| Error::Validation(format!("item {id} missing from system")))?;
        let cost_backlog = if item.kind == crate::system::ItemKind::EndItem {
            item.cost_backlog
        } else {
            config.component_backlog_penalty
        };
        items.push(ItemData {
            id,
            processing_time: item.processing_time,
            setup_time: item.setup_time_mean,
            cost_fgi: item.cost_fgi,
            cost_wip: item.cost_wip,
            cost_backlog,
            initial_fgi: st.initial_fgi,
            initial_backlog: st.initial_backlog,
            initial_wip: st.initial_wip,
            demand: st.demand_schedule.clone(),
        });
    }
    let specs: Vec<OrderSpec> = orders
        .iter()
        .map(|o| OrderSpec { id: o.id, item: o.item, quantity: o.quantity, due: o.due_period })
        .collect();
    ReleaseModelInstance::new(
        input.now,
        input.horizon,
        items,
        specs,
        config.max_lead,
        config.release_until_due,
        cf.clone(),
    )
}

/// Release scheduler backed by the exact solver: one model per resource.
/// Keeps the latest certificates so the caller can audit every solve.
pub struct CfOptimizer<'a> {
    system: &'a ProductionSystem,
    cf_config: CfConfig,
    config: OptimizerConfig,
    certificates: Vec<(String, SolveCertificate)>,
}

impl<'a> CfOptimizer<'a> {
    pub fn new(system: &'a ProductionSystem, cf_config: CfConfig, config: OptimizerConfig) -> Self {
        Self { system, cf_config, config, certificates: Vec::new() }
    }

    /// Certificates from the most recent planning run, one per solved
    /// resource, in solve order.
    pub fn take_certificates(&mut self) -> Vec<(String, SolveCertificate)> {
        std::mem::take(&mut self.certificates)
    }
}

impl ReleaseScheduler for CfOptimizer<'_> {
    fn schedule_releases(
        &mut self,
        input: &ResourceScheduleInput<'_>,
        orders: &mut [PlannedOrder],
    ) -> Result<()> {
        // Orders already due (or overdue) have no release window left to
        // optimize: they go out immediately at their floored backward
        // schedule. The model still needs to feel their load, so their
        // quantities count as workload already in the system.
        let mut urgent_wip: BTreeMap<ItemId, f64> = BTreeMap::new();
        let mut optimizable = Vec::new();
        for o in orders.iter() {
            if o.due_period <= input.now {
                *urgent_wip.entry(o.item).or_insert(0.0) += o.quantity;
            } else {
                optimizable.push(o.clone());
            }
        }
        if optimizable.is_empty() {
            return Ok(());
        }
        let mut item_states = input.item_states.clone();
        for (item, qty) in urgent_wip {
            if let Some(st) = item_states.get_mut(&item) {
                st.initial_wip += qty;
            }
        }
        let adjusted = ResourceScheduleInput {
            resource: input.resource,
            now: input.now,
            horizon: input.horizon,
            item_states,
        };
        let cf = self.cf_config.build(input.resource.capacity_minutes)?;
        let instance = build_instance(&adjusted, &optimizable, self.system, &cf, &self.config)?;
        let (plan, cert) = solve(&instance, &self.config.limits)?;
        verify_certificate(&instance, &plan, &cert)
            .map_err(|v| Error::Solver(format!("certificate rejected: {v}")))?;
        for o in orders.iter_mut() {
            if o.due_period <= input.now {
                continue;
            }
            let release = plan.releases.get(&o.id).copied().ok_or_else(|| {
                Error::Solver(format!("solver returned no release for order {}", o.id))
            })?;
            o.release_period = release;
        }
        self.certificates.push((input.resource.id.clone(), cert));
        Ok(())
    }
}
