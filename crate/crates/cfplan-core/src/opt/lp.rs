//! LP relaxation assembly on the microlp backend.
//!
//! One problem covers the whole grid: release indicators per order and
//! candidate period, plus WIP / FGI / backlog / production trajectories per
//! item and load / processed-load / overload aggregates per period. The
//! release trajectory R is substituted directly into the balance rows
//! (R_{g,t} = Σ_j quantity_j · RI_{j,t}), which drops one variable family
//! without changing the model.
//!
//! Branch-and-bound nodes restrict orders to sub-windows. Rather than
//! assembling a fresh problem per node, they clone the solved root relaxation
//! and fix the excluded indicator columns to zero; microlp re-optimizes each
//! fix with dual simplex steps from the previous basis, which is far cheaper
//! than a cold solve. The variable layout is identical across all assemblies
//! of one instance, so indicator handles carry over.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use super::{ItemTrajectory, ReleaseModelInstance, ReleasePlan};
use crate::{Error, Result};

pub(crate) struct VarMap {
    /// Per order: (grid period, variable) for each candidate period.
    pub ri: Vec<Vec<(usize, Variable)>>,
    pub wip: Vec<Vec<Variable>>,
    pub inv: Vec<Vec<Variable>>,
    pub back: Vec<Vec<Variable>>,
    pub prod: Vec<Vec<Variable>>,
    pub load: Vec<Variable>,
    pub pload: Vec<Variable>,
    pub over: Vec<Variable>,
}

pub(crate) struct LpModel {
    pub problem: Problem,
    pub vars: VarMap,
}

/// Builds the relaxation with each order restricted to `ranges[j]`
/// (inclusive, grid-relative, a sub-range of its window). Indicator columns
/// outside the range are pinned to zero so variable indexing is identical
/// across all assemblies of one instance.
pub(crate) fn assemble(instance: &ReleaseModelInstance, ranges: &[(usize, usize)]) -> LpModel {
    let t_len = instance.horizon();
    let items = instance.items();
    let orders = instance.orders();
    let mut p = Problem::new(OptimizationDirection::Minimize);

    let mut ri: Vec<Vec<(usize, Variable)>> = Vec::with_capacity(orders.len());
    for (j, _) in orders.iter().enumerate() {
        let (lo, hi) = instance.window(j);
        let (rlo, rhi) = ranges[j];
        let mut cols = Vec::with_capacity(hi - lo + 1);
        for tau in lo..=hi {
            let bounds = if tau >= rlo && tau <= rhi { (0.0, 1.0) } else { (0.0, 0.0) };
            cols.push((tau, p.add_var(0.0, bounds)));
        }
        ri.push(cols);
    }

    let traj = |p: &mut Problem, cost: f64| -> Vec<Variable> {
        (0..t_len).map(|_| p.add_var(cost, (0.0, f64::INFINITY))).collect()
    };
    let mut wip = Vec::new();
    let mut inv = Vec::new();
    let mut back = Vec::new();
    let mut prod = Vec::new();
    for item in items {
        wip.push(traj(&mut p, item.cost_wip));
        inv.push(traj(&mut p, item.cost_fgi));
        back.push(traj(&mut p, item.cost_backlog));
        prod.push(traj(&mut p, 0.0));
    }
    let load = traj(&mut p, 0.0);
    let pload = traj(&mut p, 0.0);
    let over = traj(&mut p, instance.overload_penalty());

    // One release per order, inside its window.
    for cols in &ri {
        let expr: Vec<(Variable, f64)> = cols.iter().map(|&(_, v)| (v, 1.0)).collect();
        p.add_constraint(expr.as_slice(), ComparisonOp::Eq, 1.0);
    }

    // No overtaking: for consecutive orders of an item (due-ordered), the
    // earlier-due order's release period is no later.
    for item in items {
        let idxs = instance.orders_of(item.id);
        for pair in idxs.windows(2) {
            let mut expr: Vec<(Variable, f64)> = Vec::new();
            for &(tau, v) in &ri[pair[0]] {
                if tau > 0 {
                    expr.push((v, tau as f64));
                }
            }
            for &(tau, v) in &ri[pair[1]] {
                if tau > 0 {
                    expr.push((v, -(tau as f64)));
                }
            }
            if !expr.is_empty() {
                p.add_constraint(expr.as_slice(), ComparisonOp::Le, 0.0);
            }
        }
    }

    // WIP balance: W_t = W_{t-1} + R_t − P_{t-1}; R substituted.
    for (gi, item) in items.iter().enumerate() {
        for tau in 0..t_len {
            let mut expr: Vec<(Variable, f64)> = vec![(wip[gi][tau], 1.0)];
            if tau > 0 {
                expr.push((wip[gi][tau - 1], -1.0));
                expr.push((prod[gi][tau - 1], 1.0));
            }
            for (j, order) in orders.iter().enumerate() {
                if order.item != item.id {
                    continue;
                }
                for &(t, v) in &ri[j] {
                    if t == tau {
                        expr.push((v, -order.quantity));
                    }
                }
            }
            let rhs = if tau == 0 { item.initial_wip } else { 0.0 };
            p.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs);
        }
    }

    // Net inventory balance: I_t − B_t = I_{t-1} − B_{t-1} + P_{t-1} − X_t.
    for (gi, item) in items.iter().enumerate() {
        for tau in 0..t_len {
            let mut expr: Vec<(Variable, f64)> =
                vec![(inv[gi][tau], 1.0), (back[gi][tau], -1.0)];
            let mut rhs = -item.demand[tau];
            if tau > 0 {
                expr.push((inv[gi][tau - 1], -1.0));
                expr.push((back[gi][tau - 1], 1.0));
                expr.push((prod[gi][tau - 1], -1.0));
            } else {
                rhs += item.initial_fgi - item.initial_backlog;
            }
            p.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs);
        }
    }

    // Period couplings: capacity with overload relief, interior clearing
    // segments (hard), and the load cap with relief.
    let mc = instance.capacity();
    for tau in 0..t_len {
        p.add_constraint(
            [(pload[tau], 1.0), (over[tau], -1.0)].as_slice(),
            ComparisonOp::Le,
            mc,
        );
        for seg in instance.cf().interior_segments() {
            p.add_constraint(
                [(pload[tau], 1.0), (load[tau], -seg.slope)].as_slice(),
                ComparisonOp::Le,
                seg.intercept,
            );
        }
        p.add_constraint(
            [(pload[tau], 1.0), (load[tau], -1.0), (over[tau], -1.0)].as_slice(),
            ComparisonOp::Le,
            0.0,
        );
    }

    // Definitions: processed load and system load in minutes, both charging
    // an order's setup in its release period.
    for tau in 0..t_len {
        let mut pl_expr: Vec<(Variable, f64)> = vec![(pload[tau], 1.0)];
        let mut l_expr: Vec<(Variable, f64)> = vec![(load[tau], 1.0)];
        for (gi, item) in items.iter().enumerate() {
            pl_expr.push((prod[gi][tau], -item.processing_time));
            l_expr.push((wip[gi][tau], -item.processing_time));
        }
        for (j, order) in orders.iter().enumerate() {
            let setup = instance.items()[instance.item_index(order.item)].setup_time;
            if setup == 0.0 {
                continue;
            }
            for &(t, v) in &ri[j] {
                if t == tau {
                    pl_expr.push((v, -setup));
                    l_expr.push((v, -setup));
                }
            }
        }
        p.add_constraint(pl_expr.as_slice(), ComparisonOp::Eq, 0.0);
        p.add_constraint(l_expr.as_slice(), ComparisonOp::Eq, 0.0);
    }

    LpModel {
        problem: p,
        vars: VarMap { ri, wip, inv, back, prod, load, pload, over },
    }
}

pub(crate) fn solve_lp(model: &LpModel) -> Result<Solution> {
    model
        .problem
        .clone()
        .solve()
        .map_err(|e| Error::Solver(format!("relaxation failed: {e}")))
}

/// Warm re-solve of a solved relaxation with every indicator outside
/// `ranges[j]` fixed to zero. Starts from `base`'s optimal basis and stays
/// optimal after each fix (dual simplex), so the result equals a cold solve
/// of the restricted problem. Returns `None` when the restriction is
/// infeasible.
pub(crate) fn refine_solution(
    vars: &VarMap,
    base: &Solution,
    ranges: &[(usize, usize)],
) -> Result<Option<Solution>> {
    let mut sol = base.clone();
    for (j, cols) in vars.ri.iter().enumerate() {
        let (lo, hi) = ranges[j];
        for &(tau, v) in cols {
            if tau < lo || tau > hi {
                sol = match sol.fix_var(v, 0.0) {
                    Ok(s) => s,
                    Err(microlp::Error::Infeasible) => return Ok(None),
                    Err(e) => {
                        return Err(Error::Solver(format!("warm relaxation failed: {e}")))
                    }
                };
            }
        }
    }
    Ok(Some(sol))
}

/// Warm re-solve with every order pinned to its `assignment` period: the
/// indicator there is fixed to one, all others to zero. Returns `None` when
/// the pinned problem is infeasible (callers fall back to a cold solve).
pub(crate) fn pinned_solution(
    vars: &VarMap,
    base: &Solution,
    assignment: &[usize],
) -> Result<Option<Solution>> {
    let mut sol = base.clone();
    for (j, cols) in vars.ri.iter().enumerate() {
        for &(tau, v) in cols {
            let val = if tau == assignment[j] { 1.0 } else { 0.0 };
            sol = match sol.fix_var(v, val) {
                Ok(s) => s,
                Err(microlp::Error::Infeasible) => return Ok(None),
                Err(e) => return Err(Error::Solver(format!("warm relaxation failed: {e}"))),
            };
        }
    }
    Ok(Some(sol))
}

/// Reads the candidate release period per order from a solution. Returns
/// `None` for any order whose indicators are not integral within `tol`.
pub(crate) fn integral_assignment(
    vars: &VarMap,
    solution: &Solution,
    tol: f64,
) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(vars.ri.len());
    for cols in &vars.ri {
        let mut chosen: Option<usize> = None;
        for &(tau, v) in cols {
            let val = *solution.var_value(v);
            if (val - 1.0).abs() <= tol {
                if chosen.is_some() {
                    return None;
                }
                chosen = Some(tau);
            } else if val.abs() > tol {
                return None;
            }
        }
        out.push(chosen?);
    }
    Some(out)
}

/// Builds the full plan from a solved model and an integral assignment.
pub(crate) fn extract_plan(
    instance: &ReleaseModelInstance,
    vars: &VarMap,
    solution: &Solution,
    assignment: &[usize],
) -> ReleasePlan {
    let t_len = instance.horizon();
    let read = |vs: &[Variable]| -> Vec<f64> {
        vs.iter().map(|v| *solution.var_value(*v)).collect()
    };
    let mut trajectories = std::collections::BTreeMap::new();
    for (gi, item) in instance.items().iter().enumerate() {
        let mut releases = vec![0.0; t_len];
        for (j, order) in instance.orders().iter().enumerate() {
            if order.item == item.id {
                releases[assignment[j]] += order.quantity;
            }
        }
        trajectories.insert(
            item.id,
            ItemTrajectory {
                releases,
                wip: read(&vars.wip[gi]),
                inventory: read(&vars.inv[gi]),
                backlog: read(&vars.back[gi]),
                production: read(&vars.prod[gi]),
            },
        );
    }
    let releases = instance
        .orders()
        .iter()
        .enumerate()
        .map(|(j, o)| (o.id, instance.start_period() + assignment[j] as u32))
        .collect();
    ReleasePlan {
        releases,
        trajectories,
        load: read(&vars.load),
        processed_load: read(&vars.pload),
        overload: read(&vars.over),
        objective: solution.objective(),
    }
}
