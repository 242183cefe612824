//! Brute-force reference for tiny instances: enumerate every release
//! assignment that respects windows and no-overtaking, solve the remaining
//! continuous problem with the standalone simplex, and keep the best.
//!
//! The continuous matrix is assembled here from the model definition,
//! independently of the production LP layer, so a bug in either assembly
//! shows up as a disagreement between `solve` and this oracle.

use std::collections::BTreeMap;

use super::simplex::{solve_dense, DenseLp, LpOutcome};
use super::ReleaseModelInstance;
use crate::{Error, Result};

const MAX_ITEMS: usize = 3;
const MAX_ORDERS: usize = 4;
const MAX_HORIZON: usize = 8;
const MAX_ASSIGNMENTS: u128 = 1000;

/// Minimum objective over all feasible release assignments.
pub fn brute_force_oracle(instance: &ReleaseModelInstance) -> Result<f64> {
    enumerate(instance).map(|(_, obj)| obj)
}

/// The minimizing release map (order id → absolute period) and objective.
/// Cost ties resolve to the lexicographically latest assignment in order
/// index order, mirroring the solver's stated preference.
pub fn brute_force_argmin(
    instance: &ReleaseModelInstance,
) -> Result<(BTreeMap<u64, u32>, f64)> {
    let (assignment, obj) = enumerate(instance)?;
    let releases = instance
        .orders()
        .iter()
        .enumerate()
        .map(|(j, o)| (o.id, instance.start_period() + assignment[j] as u32))
        .collect();
    Ok((releases, obj))
}

fn enumerate(instance: &ReleaseModelInstance) -> Result<(Vec<usize>, f64)> {
    let n_orders = instance.orders().len();
    if instance.items().len() > MAX_ITEMS
        || n_orders > MAX_ORDERS
        || instance.horizon() > MAX_HORIZON
    {
        return Err(Error::Validation(format!(
            "instance too large for the oracle: {} items, {} orders, horizon {} (limits {MAX_ITEMS}/{MAX_ORDERS}/{MAX_HORIZON})",
            instance.items().len(),
            n_orders,
            instance.horizon()
        )));
    }
    let mut combos: u128 = 1;
    for j in 0..n_orders {
        let (lo, hi) = instance.window(j);
        combos = combos.saturating_mul((hi - lo + 1) as u128);
    }
    if combos > MAX_ASSIGNMENTS {
        return Err(Error::Validation(format!(
            "instance too large for the oracle: {combos} assignments (limit {MAX_ASSIGNMENTS})"
        )));
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut current = vec![0usize; n_orders];
    let mut any_feasible = false;
    recurse(instance, 0, &mut current, &mut best, &mut any_feasible)?;
    best.ok_or_else(|| {
        if any_feasible {
            Error::Solver("oracle lost track of its best assignment".into())
        } else {
            Error::Solver("every release assignment is infeasible".into())
        }
    })
}

fn recurse(
    instance: &ReleaseModelInstance,
    j: usize,
    current: &mut Vec<usize>,
    best: &mut Option<(Vec<usize>, f64)>,
    any_feasible: &mut bool,
) -> Result<()> {
    if j == instance.orders().len() {
        if let LpOutcome::Optimal { objective, .. } = solve_fixed(instance, current)? {
            *any_feasible = true;
            let replace = match best {
                None => true,
                Some((inc, inc_obj)) => {
                    let scale = inc_obj.abs().max(1.0);
                    objective < *inc_obj - 1e-9 * scale
                        || ((objective - *inc_obj).abs() <= 1e-9 * scale
                            && current.as_slice() > inc.as_slice())
                }
            };
            if replace {
                *best = Some((current.clone(), objective));
            }
        }
        return Ok(());
    }
    let (lo, hi) = instance.window(j);
    for tau in lo..=hi {
        // No overtaking: within an item, due-ordered releases never decrease.
        if j > 0
            && instance.orders()[j - 1].item == instance.orders()[j].item
            && tau < current[j - 1]
        {
            continue;
        }
        current[j] = tau;
        recurse(instance, j + 1, current, best, any_feasible)?;
    }
    Ok(())
}

/// Assembles and solves the continuous problem for one fixed assignment.
/// Column layout: W, I, B, P blocks (item-major), then L, PL, C, then one
/// slack per inequality row. All variables are nonnegative.
fn solve_fixed(instance: &ReleaseModelInstance, assignment: &[usize]) -> Result<LpOutcome> {
    let t_len = instance.horizon();
    let items = instance.items();
    let g_len = items.len();
    let o = instance.overload_penalty();
    let mc = instance.capacity();
    let interior = instance.cf().interior_segments();

    let w = |gi: usize, tau: usize| gi * t_len + tau;
    let i_ = |gi: usize, tau: usize| (g_len + gi) * t_len + tau;
    let b = |gi: usize, tau: usize| (2 * g_len + gi) * t_len + tau;
    let p = |gi: usize, tau: usize| (3 * g_len + gi) * t_len + tau;
    let l = |tau: usize| 4 * g_len * t_len + tau;
    let pl = |tau: usize| 4 * g_len * t_len + t_len + tau;
    let c = |tau: usize| 4 * g_len * t_len + 2 * t_len + tau;
    let n_structural = 4 * g_len * t_len + 3 * t_len;
    let n_slacks = t_len * (2 + interior.len());
    let n = n_structural + n_slacks;

    // Per-period released quantity and setup minutes implied by the fixed
    // assignment.
    let mut released = vec![vec![0.0; t_len]; g_len];
    let mut setup = vec![0.0; t_len];
    for (j, order) in instance.orders().iter().enumerate() {
        let gi = instance.item_index(order.item);
        released[gi][assignment[j]] += order.quantity;
        setup[assignment[j]] += items[gi].setup_time;
    }

    let mut costs = vec![0.0; n];
    for (gi, item) in items.iter().enumerate() {
        for tau in 0..t_len {
            costs[w(gi, tau)] = item.cost_wip;
            costs[i_(gi, tau)] = item.cost_fgi;
            costs[b(gi, tau)] = item.cost_backlog;
        }
    }
    for tau in 0..t_len {
        costs[c(tau)] = o;
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut slack_cursor = n_structural;
    let mut push = |row: Vec<f64>, b: f64| {
        rows.push(row);
        rhs.push(b);
    };

    for (gi, item) in items.iter().enumerate() {
        for tau in 0..t_len {
            // W_t − W_{t−1} + P_{t−1} = R_t (+ initial at t = 0).
            let mut row = vec![0.0; n];
            row[w(gi, tau)] = 1.0;
            let mut r = released[gi][tau];
            if tau > 0 {
                row[w(gi, tau - 1)] = -1.0;
                row[p(gi, tau - 1)] = 1.0;
            } else {
                r += item.initial_wip;
            }
            push(row, r);

            // I_t − B_t − I_{t−1} + B_{t−1} − P_{t−1} = −X_t (+ initial).
            let mut row = vec![0.0; n];
            row[i_(gi, tau)] = 1.0;
            row[b(gi, tau)] = -1.0;
            let mut r = -item.demand[tau];
            if tau > 0 {
                row[i_(gi, tau - 1)] = -1.0;
                row[b(gi, tau - 1)] = 1.0;
                row[p(gi, tau - 1)] = -1.0;
            } else {
                r += item.initial_fgi - item.initial_backlog;
            }
            push(row, r);
        }
    }

    for tau in 0..t_len {
        // PL_t = Σ p_g P_{g,t} + setup_t and L_t = Σ p_g W_{g,t} + setup_t.
        let mut row = vec![0.0; n];
        row[pl(tau)] = 1.0;
        for (gi, item) in items.iter().enumerate() {
            row[p(gi, tau)] = -item.processing_time;
        }
        push(row, setup[tau]);

        let mut row = vec![0.0; n];
        row[l(tau)] = 1.0;
        for (gi, item) in items.iter().enumerate() {
            row[w(gi, tau)] = -item.processing_time;
        }
        push(row, setup[tau]);

        // PL_t − C_t ≤ MC.
        let mut row = vec![0.0; n];
        row[pl(tau)] = 1.0;
        row[c(tau)] = -1.0;
        row[slack_cursor] = 1.0;
        slack_cursor += 1;
        push(row, mc);

        // PL_t ≤ α L_t + β for interior clearing segments (no relief).
        for seg in interior {
            let mut row = vec![0.0; n];
            row[pl(tau)] = 1.0;
            row[l(tau)] = -seg.slope;
            row[slack_cursor] = 1.0;
            slack_cursor += 1;
            push(row, seg.intercept);
        }

        // PL_t − L_t − C_t ≤ 0.
        let mut row = vec![0.0; n];
        row[pl(tau)] = 1.0;
        row[l(tau)] = -1.0;
        row[c(tau)] = -1.0;
        row[slack_cursor] = 1.0;
        slack_cursor += 1;
        push(row, 0.0);
    }
    debug_assert_eq!(slack_cursor, n);

    solve_dense(&DenseLp { costs, rows, rhs })
}
