//! Material requirements planning: netting, fixed-order-period lot sizing,
//! backward scheduling, and BOM explosion, processed level by level.
//!
//! Release timing is pluggable: classic mode backward-schedules with a fixed
//! planned lead time; optimized mode hands each level's orders to a
//! [`ReleaseScheduler`] (one call per resource) that sets release periods
//! with full knowledge of load and capacity.
//!
//! Plans are regenerated from scratch every period. Orders already released
//! to the floor are frozen: they enter netting as receipts and the load
//! picture as WIP, and are never moved or resized.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::demand::ForecastProvider;
use crate::system::{propagate_demand, ItemId, ProductionSystem, Resource};
use crate::{Error, Result};

/// Which mechanism assigns release periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanningMode {
    /// release = due − PLT, floored at the current period.
    MrpBackward,
    /// Release periods chosen by the capacity-aware optimizer.
    CfOptimized,
}

/// Per-run planning parameters (shared by end items and components).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanningParams {
    /// Planned lead time in periods; used only in backward mode.
    pub planned_lead_time: u32,
    /// Safety stock in units = multiplier × long-run demand rate.
    pub safety_stock_multiplier: f64,
    /// Lot-sizing window length in periods (1 = lot-for-lot).
    pub fop: u32,
    pub mode: PlanningMode,
    /// Length of the planning grid in periods, counted from the current
    /// period. Defaults to forecast horizon + maximum release lead (10 + 4).
    pub planning_horizon: u32,
}

impl Default for PlanningParams {
    fn default() -> Self {
        Self {
            planned_lead_time: 1,
            safety_stock_multiplier: 0.0,
            fop: 1,
            mode: PlanningMode::MrpBackward,
            planning_horizon: 14,
        }
    }
}

impl PlanningParams {
    pub fn validate(&self) -> Result<()> {
        if self.planned_lead_time < 1 {
            return Err(Error::Validation("planned lead time must be at least 1".into()));
        }
        if self.fop < 1 {
            return Err(Error::Validation("FOP window must be at least 1 period".into()));
        }
        if self.safety_stock_multiplier < 0.0 {
            return Err(Error::Validation("safety stock multiplier must be nonnegative".into()));
        }
        if self.planning_horizon < 1 {
            return Err(Error::Validation("planning horizon must be at least 1 period".into()));
        }
        Ok(())
    }
}

/// One lot-sized order awaiting release.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedOrder {
    pub id: u64,
    pub item: ItemId,
    pub quantity: f64,
    pub due_period: u32,
    pub release_period: u32,
    pub released: bool,
}

/// An order already released to the floor and not yet completed.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenOrder {
    pub item: ItemId,
    pub quantity: f64,
    pub due_period: u32,
    pub release_period: u32,
    /// True while the lot waits for component stock; its BOM needs are still
    /// outstanding and reappear as immediate child gross requirements.
    pub deferred: bool,
}

/// Snapshot of everything planning reads: current period, stock, end-item
/// backlog, frozen open orders, and the long-run demand rates used for
/// safety stock sizing.
#[derive(Debug, Clone, Default)]
pub struct PlanningState {
    pub now: u32,
    pub on_hand: BTreeMap<ItemId, f64>,
    pub backlog: BTreeMap<ItemId, f64>,
    pub open_orders: Vec<OpenOrder>,
    pub end_rates: BTreeMap<ItemId, f64>,
}

/// Per-item planning worksheet: the classic MRP tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPlan {
    pub item: ItemId,
    pub gross: Vec<f64>,
    pub projected_on_hand: Vec<f64>,
    pub net: Vec<f64>,
    pub orders: Vec<PlannedOrder>,
}

/// A full plan for one period: worksheets per item, orders carrying release
/// periods.
#[derive(Debug, Clone, PartialEq)]
pub struct MrpPlan {
    pub now: u32,
    pub items: BTreeMap<ItemId, NetPlan>,
}

impl MrpPlan {
    /// All planned orders across items, in (LLC-planning, item, due) order.
    pub fn orders(&self) -> impl Iterator<Item = &PlannedOrder> {
        self.items.values().flat_map(|p| p.orders.iter())
    }

    /// Orders whose release period is the current period, EDD-sorted.
    pub fn due_for_release(&self) -> Vec<&PlannedOrder> {
        let mut out: Vec<&PlannedOrder> =
            self.orders().filter(|o| o.release_period == self.now).collect();
        out.sort_by_key(|o| (o.due_period, o.item, o.id));
        out
    }

    /// Delimited dump, one row per order: period, item, due, release, qty.
    pub fn dump_rows(&self, mode: PlanningMode) -> String {
        let mode = match mode {
            PlanningMode::MrpBackward => "mrp-backward",
            PlanningMode::CfOptimized => "cf-optimized",
        };
        let mut out = String::from("period,item,due,release,quantity,mode\n");
        let mut orders: Vec<&PlannedOrder> = self.orders().collect();
        orders.sort_by_key(|o| o.id);
        for o in orders {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.now, o.item, o.due_period, o.release_period, o.quantity, mode
            );
        }
        out
    }
}

/// Load and demand picture for one item handed to the release optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemScheduleState {
    pub initial_fgi: f64,
    pub initial_backlog: f64,
    pub initial_wip: f64,
    /// Gross requirements per grid period (index 0 = current period).
    pub demand_schedule: Vec<f64>,
}

/// Everything the optimizer needs about one resource at one level.
#[derive(Debug)]
pub struct ResourceScheduleInput<'a> {
    pub resource: &'a Resource,
    pub now: u32,
    pub horizon: usize,
    /// State for every item routed on the resource, including items without
    /// new orders this run (their WIP and demand still shape the load).
    pub item_states: BTreeMap<ItemId, ItemScheduleState>,
}

/// Assigns release periods to a resource's planned orders. Implementations
/// must keep order identity (id, item, quantity, due) untouched and set only
/// `release_period`, within [current period, due period].
pub trait ReleaseScheduler {
    fn schedule_releases(
        &mut self,
        input: &ResourceScheduleInput<'_>,
        orders: &mut [PlannedOrder],
    ) -> Result<()>;
}

/// Standard MRP netting. Projected on-hand starts at `on_hand`, gains
/// receipts, and is floored at `safety_stock`: each period's net requirement
/// is the shortfall below the floor after gross demand.
pub fn netting(
    gross: &[f64],
    on_hand: f64,
    scheduled_receipts: &[f64],
    open_wip_receipts: &[f64],
    safety_stock: f64,
) -> Vec<f64> {
    netting_with_projection(gross, on_hand, scheduled_receipts, open_wip_receipts, safety_stock).0
}

/// Netting that also returns the projected on-hand after each period,
/// assuming net requirements are received exactly at their periods.
pub fn netting_with_projection(
    gross: &[f64],
    on_hand: f64,
    scheduled_receipts: &[f64],
    open_wip_receipts: &[f64],
    safety_stock: f64,
) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(gross.len(), scheduled_receipts.len());
    debug_assert_eq!(gross.len(), open_wip_receipts.len());
    let mut net = Vec::with_capacity(gross.len());
    let mut projection = Vec::with_capacity(gross.len());
    let mut poh = on_hand;
    for t in 0..gross.len() {
        poh += scheduled_receipts[t] + open_wip_receipts[t];
        let shortfall = (gross[t] + safety_stock - poh).max(0.0);
        net.push(shortfall);
        poh = poh - gross[t] + shortfall;
        projection.push(poh);
    }
    (net, projection)
}

/// Fixed-order-period lot sizing. Windows of `fop` periods tile the horizon
/// starting at the first positive net requirement; each window's net sum
/// becomes one order due at the window's first period. Windows summing to
/// zero produce no order. `start_period` is the absolute period of `net[0]`.
pub fn fop_lotsize(item: ItemId, net: &[f64], fop: u32, start_period: u32) -> Vec<PlannedOrder> {
    let k = fop.max(1) as usize;
    let mut orders = Vec::new();
    let Some(first) = net.iter().position(|&v| v > 0.0) else {
        return orders;
    };
    let mut idx = first;
    while idx < net.len() {
        let quantity: f64 = net[idx..net.len().min(idx + k)].iter().sum();
        if quantity > 0.0 {
            let due = start_period + idx as u32;
            orders.push(PlannedOrder {
                id: 0,
                item,
                quantity,
                due_period: due,
                release_period: due,
                released: false,
            });
        }
        idx += k;
    }
    orders
}

/// release = due − PLT, floored at `now` so late starts release immediately.
pub fn backward_schedule(orders: &mut [PlannedOrder], plt: u32, now: u32) {
    for o in orders {
        o.release_period = o.due_period.saturating_sub(plt).max(now);
    }
}

/// Adds each order's BOM needs to its children's gross requirements at the
/// parent's release period. Requirements before `start_period` or past the
/// grid are clamped onto it.
pub fn bom_explode(
    orders: &[PlannedOrder],
    system: &ProductionSystem,
    start_period: u32,
    horizon: usize,
) -> BTreeMap<ItemId, Vec<f64>> {
    let mut out: BTreeMap<ItemId, Vec<f64>> = BTreeMap::new();
    for o in orders {
        for (child, qpu) in system.children(o.item) {
            if system.item(child).map(|i| i.kind.is_raw()).unwrap_or(true) {
                continue;
            }
            let idx = (o.release_period.max(start_period) - start_period) as usize;
            let idx = idx.min(horizon - 1);
            out.entry(child).or_insert_with(|| vec![0.0; horizon])[idx] += o.quantity * qpu;
        }
    }
    out
}

/// One full planning run: per low-level code, net → lot-size → schedule →
/// explode. End-item gross requirements come from the forecasts (realized
/// demand for the current period, forecasts beyond); child gross
/// requirements come from parent releases plus the outstanding needs of
/// deferred floor orders.
pub fn mrp_plan(
    state: &PlanningState,
    forecasts: &ForecastProvider,
    params: &PlanningParams,
    system: &ProductionSystem,
    mut scheduler: Option<&mut dyn ReleaseScheduler>,
) -> Result<MrpPlan> {
    params.validate()?;
    if params.mode == PlanningMode::CfOptimized && scheduler.is_none() {
        return Err(Error::Validation(
            "cf-optimized planning requires a release scheduler".into(),
        ));
    }
    let now = state.now;
    if forecasts.now() != now {
        return Err(Error::Validation(format!(
            "forecast clock {} does not match planning clock {now}",
            forecasts.now()
        )));
    }
    let horizon = params.planning_horizon as usize;
    let rates = propagate_demand(system, &state.end_rates);

    // Gross requirement grids for every plannable item.
    let mut gross: BTreeMap<ItemId, Vec<f64>> = system
        .items()
        .iter()
        .filter(|i| !i.kind.is_raw())
        .map(|i| (i.id, vec![0.0; horizon]))
        .collect();
    for item in system.items() {
        if item.kind == crate::system::ItemKind::EndItem {
            let row = gross.get_mut(&item.id).expect("end item is plannable");
            for (idx, slot) in row.iter_mut().enumerate() {
                *slot = forecasts.forecast(item.id, now + idx as u32);
            }
        }
    }
    // Deferred lots have not consumed their components yet; those needs are
    // due immediately.
    for open in &state.open_orders {
        if !open.deferred {
            continue;
        }
        for (child, qpu) in system.children(open.item) {
            if let Some(row) = gross.get_mut(&child) {
                row[0] += open.quantity * qpu;
            }
        }
    }

    let mut plan = MrpPlan { now, items: BTreeMap::new() };
    let mut next_id: u64 = 0;

    for level in 0..=system.max_llc() {
        let level_items: Vec<ItemId> = system
            .items_at_llc(level)
            .into_iter()
            .map(|i| i.id)
            .filter(|g| gross.contains_key(g))
            .collect();
        if level_items.is_empty() {
            continue;
        }

        let mut level_orders: Vec<PlannedOrder> = Vec::new();
        for &g in &level_items {
            let row = &gross[&g];
            let mut wip_receipts = vec![0.0; horizon];
            for open in state.open_orders.iter().filter(|o| o.item == g) {
                let idx = (open.due_period.max(now) - now) as usize;
                wip_receipts[idx.min(horizon - 1)] += open.quantity;
            }
            let backlog = state.backlog.get(&g).copied().unwrap_or(0.0);
            let available = state.on_hand.get(&g).copied().unwrap_or(0.0) - backlog;
            let ss = params.safety_stock_multiplier * rates.get(&g).copied().unwrap_or(0.0);
            let zeros = vec![0.0; horizon];
            let (net, projection) =
                netting_with_projection(row, available, &zeros, &wip_receipts, ss);
            let mut orders = fop_lotsize(g, &net, params.fop, now);
            for o in &mut orders {
                o.id = next_id;
                next_id += 1;
            }
            backward_schedule(&mut orders, params.planned_lead_time, now);
            level_orders.extend(orders.iter().cloned());
            plan.items.insert(
                g,
                NetPlan {
                    item: g,
                    gross: row.clone(),
                    projected_on_hand: projection,
                    net,
                    orders,
                },
            );
        }

        if params.mode == PlanningMode::CfOptimized {
            let scheduler = scheduler.as_deref_mut().expect("checked above");
            schedule_level(
                state, system, &gross, &level_items, &mut level_orders, now, horizon, scheduler,
            )?;
            // Copy optimized releases back into the worksheets.
            let by_id: BTreeMap<u64, u32> =
                level_orders.iter().map(|o| (o.id, o.release_period)).collect();
            for &g in &level_items {
                let netplan = plan.items.get_mut(&g).expect("planned above");
                for o in &mut netplan.orders {
                    o.release_period = by_id[&o.id];
                }
            }
        }

        // Explode this level's releases into child gross requirements.
        let child_gross = bom_explode(&level_orders, system, now, horizon);
        for (child, row) in child_gross {
            if let Some(acc) = gross.get_mut(&child) {
                for (slot, add) in acc.iter_mut().zip(row) {
                    *slot += add;
                }
            }
        }
    }
    Ok(plan)
}

/// Group one level's orders by resource and let the optimizer set releases.
#[allow(clippy::too_many_arguments)]
fn schedule_level(
    state: &PlanningState,
    system: &ProductionSystem,
    gross: &BTreeMap<ItemId, Vec<f64>>,
    level_items: &[ItemId],
    level_orders: &mut Vec<PlannedOrder>,
    now: u32,
    horizon: usize,
    scheduler: &mut dyn ReleaseScheduler,
) -> Result<()> {
    let mut by_resource: BTreeMap<String, Vec<ItemId>> = BTreeMap::new();
    for &g in level_items {
        if let Some(res) = system.resource_of(g) {
            by_resource.entry(res.id.clone()).or_default().push(g);
        }
    }
    let mut rescheduled: BTreeMap<u64, u32> = BTreeMap::new();
    for (res_id, items) in &by_resource {
        let resource = system.resource(res_id).expect("resource exists");
        let mut item_states = BTreeMap::new();
        for &g in &resource.items {
            let wip: f64 = state
                .open_orders
                .iter()
                .filter(|o| o.item == g)
                .map(|o| o.quantity)
                .sum();
            item_states.insert(
                g,
                ItemScheduleState {
                    initial_fgi: state.on_hand.get(&g).copied().unwrap_or(0.0),
                    initial_backlog: state.backlog.get(&g).copied().unwrap_or(0.0),
                    initial_wip: wip,
                    demand_schedule: gross
                        .get(&g)
                        .cloned()
                        .unwrap_or_else(|| vec![0.0; horizon]),
                },
            );
        }
        let input = ResourceScheduleInput { resource, now, horizon, item_states };
        let mut orders: Vec<PlannedOrder> = level_orders
            .iter()
            .filter(|o| items.contains(&o.item))
            .cloned()
            .collect();
        orders.sort_by_key(|o| (o.item, o.due_period, o.id));
        scheduler.schedule_releases(&input, &mut orders)?;
        for o in &orders {
            if o.release_period < now || o.release_period > o.due_period {
                return Err(Error::Solver(format!(
                    "scheduler set release {} outside [{now}, {}] for order {}",
                    o.release_period, o.due_period, o.id
                )));
            }
            rescheduled.insert(o.id, o.release_period);
        }
    }
    for o in level_orders.iter_mut() {
        if let Some(&r) = rescheduled.get(&o.id) {
            o.release_period = r;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandParams, ForecastSet};
    use crate::system::build_ps1;
    use proptest::prelude::*;

    #[test]
    fn netting_with_ample_stock_yields_zero() {
        let gross = vec![0.0; 6];
        let z = vec![0.0; 6];
        assert_eq!(netting(&gross, 30.0, &z, &z, 0.0), vec![0.0; 6]);
    }

    #[test]
    fn netting_shortfall_below_safety_stock() {
        let z = vec![0.0];
        assert_eq!(netting(&[50.0], 30.0, &z, &z, 10.0), vec![30.0]);
    }

    #[test]
    fn netting_passes_demand_through_empty_stock() {
        let z = vec![0.0, 0.0];
        assert_eq!(netting(&[20.0, 20.0], 0.0, &z, &z, 0.0), vec![20.0, 20.0]);
    }

    #[test]
    fn netting_counts_wip_receipts() {
        let z = vec![0.0, 0.0];
        let wip = vec![0.0, 15.0];
        assert_eq!(netting(&[10.0, 20.0], 10.0, &z, &wip, 0.0), vec![0.0, 5.0]);
    }

    #[test]
    fn netting_negative_available_recovers_immediately() {
        // Stock minus backlog can be negative; the shortfall becomes an
        // immediate net requirement.
        let z = vec![0.0, 0.0];
        assert_eq!(netting(&[0.0, 10.0], -5.0, &z, &z, 0.0), vec![5.0, 10.0]);
    }

    #[test]
    fn projection_never_dips_below_safety_stock() {
        let gross = vec![12.0, 0.0, 40.0, 3.5];
        let z = vec![0.0; 4];
        let (_, proj) = netting_with_projection(&gross, 7.0, &z, &z, 6.0);
        for p in proj {
            assert!(p >= 6.0 - 1e-12, "projected on-hand {p} below floor");
        }
    }

    #[test]
    fn fop_two_period_windows() {
        let orders = fop_lotsize(1, &[10.0, 20.0, 30.0, 40.0], 2, 1);
        let got: Vec<(u32, f64)> = orders.iter().map(|o| (o.due_period, o.quantity)).collect();
        assert_eq!(got, vec![(1, 30.0), (3, 70.0)]);
    }

    #[test]
    fn fop_one_is_lot_for_lot() {
        let orders = fop_lotsize(1, &[5.0, 0.0, 7.0], 1, 10);
        let got: Vec<(u32, f64)> = orders.iter().map(|o| (o.due_period, o.quantity)).collect();
        assert_eq!(got, vec![(10, 5.0), (12, 7.0)]);
    }

    #[test]
    fn fop_zero_net_produces_no_orders() {
        assert!(fop_lotsize(1, &[0.0; 8], 3, 1).is_empty());
    }

    #[test]
    fn fop_windows_anchor_at_first_positive_net_and_skip_empty() {
        let orders = fop_lotsize(1, &[0.0, 10.0, 0.0, 0.0, 0.0, 5.0], 2, 1);
        let got: Vec<(u32, f64)> = orders.iter().map(|o| (o.due_period, o.quantity)).collect();
        // Windows [2,3], [4,5], [6,7]: the middle one sums to zero.
        assert_eq!(got, vec![(2, 10.0), (6, 5.0)]);
    }

    #[test]
    fn backward_schedule_examples() {
        let mut orders = vec![
            PlannedOrder { id: 0, item: 1, quantity: 1.0, due_period: 10, release_period: 0, released: false },
            PlannedOrder { id: 1, item: 1, quantity: 1.0, due_period: 2, release_period: 0, released: false },
        ];
        backward_schedule(&mut orders, 3, 1);
        assert_eq!(orders[0].release_period, 7);
        assert_eq!(orders[1].release_period, 1);
        backward_schedule(&mut orders, 1, 1);
        assert_eq!(orders[0].release_period, 9);
    }

    #[test]
    fn explode_accumulates_at_release_period() {
        let system = build_ps1();
        let orders = vec![
            PlannedOrder { id: 0, item: 100, quantity: 40.0, due_period: 8, release_period: 7, released: false },
            PlannedOrder { id: 1, item: 101, quantity: 10.0, due_period: 9, release_period: 7, released: false },
        ];
        let gross = bom_explode(&orders, &system, 1, 14);
        // Items 100 and 101 share component 200 in this system.
        assert_eq!(gross[&200][6], 50.0);
        assert_eq!(gross[&200].iter().sum::<f64>(), 50.0);
    }

    #[test]
    fn explode_skips_raw_children() {
        let system = build_ps1();
        let orders = vec![PlannedOrder {
            id: 0, item: 200, quantity: 12.0, due_period: 5, release_period: 4, released: false,
        }];
        let gross = bom_explode(&orders, &system, 1, 14);
        assert!(gross.is_empty(), "raw material children are not planned");
    }

    proptest! {
        #[test]
        fn lot_sizing_conserves_net_quantity(
            net in proptest::collection::vec(0.0f64..100.0, 1..20),
            k in 1u32..5,
        ) {
            let orders = fop_lotsize(7, &net, k, 1);
            let total: f64 = orders.iter().map(|o| o.quantity).sum();
            let want: f64 = net.iter().sum();
            prop_assert!((total - want).abs() < 1e-9);
        }

        #[test]
        fn nets_are_nonnegative_and_cover_demand(
            gross in proptest::collection::vec(0.0f64..80.0, 1..16),
            on_hand in 0.0f64..200.0,
            ss in 0.0f64..40.0,
        ) {
            let z = vec![0.0; gross.len()];
            let (net, proj) = netting_with_projection(&gross, on_hand, &z, &z, ss);
            for v in &net {
                prop_assert!(*v >= 0.0);
            }
            for p in proj {
                prop_assert!(p >= ss - 1e-9);
            }
        }
    }

    #[test]
    fn stationary_demand_gives_ceil_horizon_over_k_orders() {
        let net = vec![10.0; 14];
        for k in 1..=3 {
            let orders = fop_lotsize(1, &net, k, 1);
            assert_eq!(orders.len(), (14 + k as usize - 1) / k as usize);
        }
    }

    fn ps1_forecasts(x: f64, now: u32) -> ForecastProvider {
        let params = DemandParams {
            rates: BTreeMap::from([(100, x), (101, x), (102, x), (103, x)]),
            horizon: 10,
            alpha: 0.0,
            beta: 0.0,
        };
        let mut fs = ForecastSet::init(params, 10, 1).unwrap();
        for _ in 0..now {
            fs.advance_one_period();
        }
        ForecastProvider::Mmfe(fs)
    }

    fn ps1_state(now: u32, x: f64) -> PlanningState {
        PlanningState {
            now,
            end_rates: BTreeMap::from([(100, x), (101, x), (102, x), (103, x)]),
            ..Default::default()
        }
    }

    #[test]
    fn cold_start_plan_orders_every_period() {
        let system = build_ps1();
        let x = 47.06;
        let fc = ps1_forecasts(x, 1);
        let state = ps1_state(1, x);
        let params = PlanningParams::default();
        let plan = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        let p100 = &plan.items[&100];
        assert_eq!(p100.orders.len(), 14);
        for (i, o) in p100.orders.iter().enumerate() {
            assert_eq!(o.due_period, 1 + i as u32);
            assert!((o.quantity - x).abs() < 1e-9);
            assert_eq!(o.release_period, o.due_period.saturating_sub(1).max(1));
        }
        // Component gross follows parent releases: two parents (due 1 and 2)
        // release in period 1.
        let p200 = &plan.items[&200];
        assert!((p200.gross[0] - 4.0 * x).abs() < 1e-9);
        assert!((p200.gross[1] - 2.0 * x).abs() < 1e-9);
    }

    #[test]
    fn steady_state_plan_releases_one_period_ahead() {
        let system = build_ps1();
        let x = 47.06;
        let now = 5;
        let fc = ps1_forecasts(x, now);
        let mut state = ps1_state(now, x);
        for g in [100u32, 101, 102, 103] {
            state.on_hand.insert(g, x);
        }
        for c in [200u32, 201] {
            state.on_hand.insert(c, 2.0 * x);
        }
        let params = PlanningParams::default();
        let plan = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        let p100 = &plan.items[&100];
        // Stock covers the current period's delivery; first net demand is
        // due next period, released now: a one-period lead for every order.
        assert_eq!(p100.orders[0].due_period, now + 1);
        assert_eq!(p100.orders[0].release_period, now);
        for o in &p100.orders {
            assert_eq!(o.due_period - o.release_period, 1);
            assert!((o.quantity - x).abs() < 1e-9);
        }
    }

    #[test]
    fn open_orders_offset_net_requirements() {
        let system = build_ps1();
        let x = 47.06;
        let fc = ps1_forecasts(x, 1);
        let mut state = ps1_state(1, x);
        state.on_hand.insert(100, x);
        state.open_orders.push(OpenOrder {
            item: 100,
            quantity: x,
            due_period: 2,
            release_period: 1,
            deferred: false,
        });
        let params = PlanningParams::default();
        let plan = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        let p100 = &plan.items[&100];
        // Stock serves due 1, the open lot serves due 2: first new order due 3.
        assert_eq!(p100.orders[0].due_period, 3);
    }

    #[test]
    fn deferred_orders_requeue_component_demand_now() {
        let system = build_ps1();
        let x = 47.06;
        let fc = ps1_forecasts(x, 3);
        let mut state = ps1_state(3, x);
        state.open_orders.push(OpenOrder {
            item: 100,
            quantity: 20.0,
            due_period: 3,
            release_period: 2,
            deferred: true,
        });
        let params = PlanningParams::default();
        let plan = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        // The deferred parent's component need lands at the current period
        // on top of the exploded requirements of this plan's own releases.
        let p200 = &plan.items[&200];
        let replanned = &plan.items[&100];
        let exploded_now: f64 = replanned
            .orders
            .iter()
            .filter(|o| o.release_period == 3)
            .map(|o| o.quantity)
            .sum::<f64>()
            + plan.items[&101].orders.iter().filter(|o| o.release_period == 3).map(|o| o.quantity).sum::<f64>();
        assert!((p200.gross[0] - (20.0 + exploded_now)).abs() < 1e-9);
    }

    #[test]
    fn replanning_is_idempotent() {
        let system = build_ps1();
        let x = 44.12;
        let fc = ps1_forecasts(x, 2);
        let mut state = ps1_state(2, x);
        state.on_hand.insert(100, 30.0);
        state.backlog.insert(101, 12.0);
        let params = PlanningParams {
            fop: 2,
            safety_stock_multiplier: 0.4,
            ..Default::default()
        };
        let a = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        let b = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ample_stock_plans_nothing() {
        let system = build_ps1();
        let x = 47.06;
        let fc = ps1_forecasts(x, 1);
        let mut state = ps1_state(1, x);
        for item in system.items() {
            state.on_hand.insert(item.id, 1e6);
        }
        let plan = mrp_plan(&state, &fc, &PlanningParams::default(), &system, None).unwrap();
        assert_eq!(plan.orders().count(), 0);
    }

    #[test]
    fn safety_stock_scales_with_propagated_rates() {
        let system = build_ps1();
        let x = 40.0;
        let fc = ps1_forecasts(x, 1);
        let state = ps1_state(1, x);
        let params = PlanningParams {
            safety_stock_multiplier: 0.5,
            ..Default::default()
        };
        let plan = mrp_plan(&state, &fc, &params, &system, None).unwrap();
        // First net requirement includes the safety stock buildup. Component
        // 200 serves two end items, so its rate (and buffer) doubles.
        assert!((plan.items[&100].net[0] - (x + 0.5 * x)).abs() < 1e-9);
        let comp_net0 = plan.items[&200].net[0];
        let comp_gross0 = plan.items[&200].gross[0];
        assert!((comp_net0 - (comp_gross0 + 0.5 * 2.0 * x)).abs() < 1e-9);
    }

    struct FixedLead(u32);
    impl ReleaseScheduler for FixedLead {
        fn schedule_releases(
            &mut self,
            input: &ResourceScheduleInput<'_>,
            orders: &mut [PlannedOrder],
        ) -> Result<()> {
            for o in orders {
                o.release_period = o.due_period.saturating_sub(self.0).max(input.now);
            }
            Ok(())
        }
    }

    #[test]
    fn optimized_mode_routes_orders_through_scheduler() {
        let system = build_ps1();
        let x = 47.06;
        let fc = ps1_forecasts(x, 1);
        let state = ps1_state(1, x);
        let params = PlanningParams {
            mode: PlanningMode::CfOptimized,
            ..Default::default()
        };
        assert!(mrp_plan(&state, &fc, &params, &system, None).is_err());
        let mut sched = FixedLead(3);
        let plan = mrp_plan(&state, &fc, &params, &system, Some(&mut sched)).unwrap();
        for o in plan.items[&100].orders.iter() {
            assert_eq!(o.release_period, o.due_period.saturating_sub(3).max(1));
        }
        // Explosion must see the optimizer's releases, not backward ones.
        let p200 = &plan.items[&200];
        let expected_now: f64 = [100u32, 101]
            .iter()
            .flat_map(|g| plan.items[g].orders.iter())
            .filter(|o| o.release_period == 1)
            .map(|o| o.quantity)
            .sum();
        assert!((p200.gross[0] - expected_now).abs() < 1e-9);
    }

    struct OutOfWindow;
    impl ReleaseScheduler for OutOfWindow {
        fn schedule_releases(
            &mut self,
            _input: &ResourceScheduleInput<'_>,
            orders: &mut [PlannedOrder],
        ) -> Result<()> {
            for o in orders {
                o.release_period = o.due_period + 1;
            }
            Ok(())
        }
    }

    #[test]
    fn scheduler_output_outside_window_is_rejected() {
        let system = build_ps1();
        let fc = ps1_forecasts(47.06, 1);
        let state = ps1_state(1, 47.06);
        let params = PlanningParams { mode: PlanningMode::CfOptimized, ..Default::default() };
        let mut sched = OutOfWindow;
        assert!(mrp_plan(&state, &fc, &params, &system, Some(&mut sched)).is_err());
    }

    #[test]
    fn plan_dump_lists_all_orders() {
        let system = build_ps1();
        let fc = ps1_forecasts(47.06, 1);
        let state = ps1_state(1, 47.06);
        let plan = mrp_plan(&state, &fc, &PlanningParams::default(), &system, None).unwrap();
        let dump = plan.dump_rows(PlanningMode::MrpBackward);
        assert_eq!(dump.lines().count(), 1 + plan.orders().count());
        assert!(dump.starts_with("period,item,due,release,quantity,mode\n"));
        assert!(dump.contains(",mrp-backward"));
    }
}
