//! Best-first branch and bound over the release indicators.
//!
//! Every node restricts each order to a sub-range of its window. Nodes store
//! only those ranges plus a lower bound inherited from their parent; the
//! node's relaxation is solved when it is popped by warm-starting from the
//! root basis with the excluded indicators fixed to zero. Inherited bounds
//! are valid lower bounds (restricting a child can only raise the optimum),
//! so pruning and the reported dual bound stay exact while memory stays flat
//! regardless of how large the search grows.
//!
//! Branching on one order propagates through the no-overtaking chain of its
//! item: later-due orders cannot release earlier than the branched range
//! allows, earlier-due orders cannot release later. Children whose ranges
//! empty out are never created.
//!
//! Among cost-equal optima the search prefers plans that release later
//! (compared lexicographically by order index). This is best-effort: ties
//! are chased only while the tie exploration budget lasts, and a cost-equal
//! but lex-later plan hidden behind a pruned bound tie can be missed. Costs
//! are exact either way; the preference only pins down which optimum is
//! reported.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use microlp::Solution;

use super::lp::{self, LpModel};
use super::{CertStatus, ReleaseModelInstance, ReleasePlan, SolveCertificate, SolveLimits};
use crate::{Error, Result};

const INTEGRALITY_TOL: f64 = 1e-7;
/// Indicators this close to 0/1 let a node solution double as the exact
/// fixed-assignment solution without a polishing re-solve.
const REUSE_TOL: f64 = 1e-9;

struct Node {
    /// Parent's LP objective: a valid lower bound on this node's optimum.
    bound: f64,
    seq: u64,
    ranges: Vec<(usize, usize)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert for best-first on (bound, seq).
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    assignment: Vec<usize>,
    plan: ReleasePlan,
}

pub(crate) fn branch_and_bound(
    instance: &ReleaseModelInstance,
    limits: &SolveLimits,
) -> Result<(ReleasePlan, SolveCertificate)> {
    let started = Instant::now();
    let full_windows: Vec<(usize, usize)> =
        (0..instance.orders().len()).map(|j| instance.window(j)).collect();
    let root_model = lp::assemble(instance, &full_windows);
    let root_solution = lp::solve_lp(&root_model)?;
    let root_bound = root_solution.objective();

    // Integral root: its solution is already optimal for the induced fixed
    // assignment (fixing can only tighten, and this point stays feasible),
    // so the common case needs exactly one LP solve.
    if let Some(assignment) =
        lp::integral_assignment(&root_model.vars, &root_solution, INTEGRALITY_TOL)
    {
        let plan = if lp::integral_assignment(&root_model.vars, &root_solution, REUSE_TOL)
            .is_some()
        {
            lp::extract_plan(instance, &root_model.vars, &root_solution, &assignment)
        } else {
            fixed_assignment_plan(instance, &root_model, &root_solution, &assignment)?
        };
        let cert = certificate(&plan, root_bound, 1);
        return Ok((plan, cert));
    }

    let mut incumbent: Option<Incumbent> = None;
    if let Some(assignment) = monotone_rounding(instance, &root_model, &root_solution) {
        if let Ok(plan) = fixed_assignment_plan(instance, &root_model, &root_solution, &assignment)
        {
            incumbent = Some(Incumbent { assignment, plan });
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut explored: usize = 1; // the root
    let mut pruned_lb = f64::INFINITY;
    let mut exhausted = false;
    push_children(
        instance,
        &root_model,
        &root_solution,
        &full_windows,
        root_bound,
        &mut heap,
        &mut seq,
    );

    while let Some(node) = heap.pop() {
        if explored >= limits.max_nodes {
            pruned_lb = pruned_lb.min(node.bound);
            exhausted = true;
            break;
        }
        if let Some(limit) = limits.time_limit {
            if started.elapsed() >= limit && incumbent.is_some() {
                pruned_lb = pruned_lb.min(node.bound);
                exhausted = true;
                break;
            }
        }
        explored += 1;

        let cutoff = |explored: usize, incumbent: &Option<Incumbent>| {
            incumbent.as_ref().map(|inc| {
                let scale = inc.plan.objective.abs().max(1.0);
                if explored <= limits.tie_exploration_nodes {
                    inc.plan.objective + 1e-7 * scale
                } else {
                    inc.plan.objective - 1e-9 * scale
                }
            })
        };
        if let Some(cut) = cutoff(explored, &incumbent) {
            if node.bound > cut {
                pruned_lb = pruned_lb.min(node.bound);
                continue;
            }
        }

        let Some(solution) =
            lp::refine_solution(&root_model.vars, &root_solution, &node.ranges)?
        else {
            // Restriction infeasible: the region holds no plans at all, so it
            // contributes nothing to the dual bound either.
            continue;
        };
        let bound = solution.objective();
        if let Some(cut) = cutoff(explored, &incumbent) {
            if bound > cut {
                pruned_lb = pruned_lb.min(bound);
                continue;
            }
        }

        if let Some(assignment) =
            lp::integral_assignment(&root_model.vars, &solution, INTEGRALITY_TOL)
        {
            let clean =
                lp::integral_assignment(&root_model.vars, &solution, REUSE_TOL).is_some();
            let plan = if clean {
                lp::extract_plan(instance, &root_model.vars, &solution, &assignment)
            } else {
                fixed_assignment_plan(instance, &root_model, &root_solution, &assignment)?
            };
            accept_candidate(&mut incumbent, assignment, plan);
            continue;
        }

        push_children(
            instance,
            &root_model,
            &solution,
            &node.ranges,
            bound,
            &mut heap,
            &mut seq,
        );
    }

    let Some(inc) = incumbent else {
        let detail = if exhausted { "within the node budget" } else { "" };
        return Err(Error::Solver(format!(
            "search ended with no feasible integral release assignment {detail}"
        )));
    };
    for node in heap.iter() {
        pruned_lb = pruned_lb.min(node.bound);
    }
    let dual = inc.plan.objective.min(pruned_lb);
    let cert = certificate(&inc.plan, dual, explored);
    Ok((inc.plan, cert))
}

/// Branch the node's most fractional order and push the surviving children.
/// No-op when no order is branchable (left to the caller's continue).
fn push_children(
    instance: &ReleaseModelInstance,
    model: &LpModel,
    solution: &Solution,
    ranges: &[(usize, usize)],
    bound: f64,
    heap: &mut BinaryHeap<Node>,
    seq: &mut u64,
) {
    let Some((branch_order, split)) = branch_choice(instance, model, solution, ranges) else {
        return;
    };
    let (lo, hi) = ranges[branch_order];
    // Later half first so it wins exact bound ties in the heap.
    let halves = [(split + 1, hi), (lo, split)];
    for &(clo, chi) in &halves {
        let Some(child) = propagated_ranges(instance, ranges, branch_order, (clo, chi)) else {
            continue;
        };
        *seq += 1;
        heap.push(Node { bound, seq: *seq, ranges: child });
    }
}

fn certificate(plan: &ReleasePlan, dual_bound: f64, nodes: usize) -> SolveCertificate {
    let scale = plan.objective.abs().max(1.0);
    let gap = ((plan.objective - dual_bound) / scale).max(0.0);
    SolveCertificate {
        status: if gap <= 1e-6 { CertStatus::Optimal } else { CertStatus::WithinGap },
        gap,
        lp_dual_bound: dual_bound,
        max_residual: 0.0,
        nodes_explored: nodes,
    }
}

/// Solves the LP with every order pinned to one period and extracts the plan.
/// Warm-starts from the root basis; falls back to a cold assembly in the
/// unexpected case that the warm path reports the pinning infeasible.
fn fixed_assignment_plan(
    instance: &ReleaseModelInstance,
    root_model: &LpModel,
    root_solution: &Solution,
    assignment: &[usize],
) -> Result<ReleasePlan> {
    if let Some(solution) = lp::pinned_solution(&root_model.vars, root_solution, assignment)? {
        return Ok(lp::extract_plan(instance, &root_model.vars, &solution, assignment));
    }
    let ranges: Vec<(usize, usize)> = assignment.iter().map(|&t| (t, t)).collect();
    let model = lp::assemble(instance, &ranges);
    let solution = lp::solve_lp(&model)?;
    Ok(lp::extract_plan(instance, &model.vars, &solution, assignment))
}

/// Replace the incumbent on strict improvement, or on a cost tie when the
/// candidate releases later in lexicographic order-index order.
fn accept_candidate(incumbent: &mut Option<Incumbent>, assignment: Vec<usize>, plan: ReleasePlan) {
    match incumbent {
        None => *incumbent = Some(Incumbent { assignment, plan }),
        Some(inc) => {
            let scale = inc.plan.objective.abs().max(1.0);
            let diff = plan.objective - inc.plan.objective;
            let better = diff < -1e-9 * scale;
            let tie = diff.abs() <= 1e-7 * scale;
            if better || (tie && lex_later(&assignment, &inc.assignment)) {
                *incumbent = Some(Incumbent { assignment, plan });
            }
        }
    }
}

fn lex_later(a: &[usize], b: &[usize]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Greater => return true,
            Ordering::Less => return false,
            Ordering::Equal => {}
        }
    }
    false
}

/// Restricts order `j` to `(clo, chi)` and tightens the rest of its item's
/// due-ordered chain through the no-overtaking relation: orders after `j`
/// can release no earlier than `clo` forces, orders before `j` no later than
/// `chi` allows. Returns `None` when any range empties.
fn propagated_ranges(
    instance: &ReleaseModelInstance,
    base: &[(usize, usize)],
    j: usize,
    (clo, chi): (usize, usize),
) -> Option<Vec<(usize, usize)>> {
    if clo > chi {
        return None;
    }
    let mut ranges = base.to_vec();
    ranges[j] = (clo, chi);
    let chain = instance.orders_of(instance.orders()[j].item);
    let pos = chain.iter().position(|&k| k == j)?;
    for w in pos + 1..chain.len() {
        let prev_lo = ranges[chain[w - 1]].0;
        let k = chain[w];
        ranges[k].0 = ranges[k].0.max(prev_lo);
        if ranges[k].0 > ranges[k].1 {
            return None;
        }
    }
    for w in (0..pos).rev() {
        let next_hi = ranges[chain[w + 1]].1;
        let k = chain[w];
        ranges[k].1 = ranges[k].1.min(next_hi);
        if ranges[k].0 > ranges[k].1 {
            return None;
        }
    }
    Some(ranges)
}

/// Most fractional order and the split period (weighted mean of its
/// indicator mass, clamped so both halves are nonempty).
fn branch_choice(
    instance: &ReleaseModelInstance,
    model: &LpModel,
    solution: &Solution,
    ranges: &[(usize, usize)],
) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for j in 0..instance.orders().len() {
        let (lo, hi) = ranges[j];
        if lo == hi {
            continue;
        }
        let mut max_val: f64 = 0.0;
        for &(_, v) in &model.vars.ri[j] {
            max_val = max_val.max(*solution.var_value(v));
        }
        let score = 1.0 - max_val;
        if score > INTEGRALITY_TOL && best.map(|(s, _)| score > s).unwrap_or(true) {
            best = Some((score, j));
        }
    }
    let (_, j) = best?;
    let (lo, hi) = ranges[j];
    let mut mean = 0.0;
    let mut mass = 0.0;
    for &(tau, v) in &model.vars.ri[j] {
        let val = *solution.var_value(v);
        mean += tau as f64 * val;
        mass += val;
    }
    let mean = if mass > 0.0 { mean / mass } else { (lo + hi) as f64 / 2.0 };
    let split = (mean.floor() as usize).clamp(lo, hi - 1);
    Some((j, split))
}

/// Rounds the root relaxation to a feasible assignment: per item, choose one
/// period per order, nondecreasing in due order, maximizing the total
/// indicator mass picked up; ties lean late.
fn monotone_rounding(
    instance: &ReleaseModelInstance,
    model: &LpModel,
    solution: &Solution,
) -> Option<Vec<usize>> {
    let t_len = instance.horizon();
    let mut assignment = vec![0usize; instance.orders().len()];
    for item in instance.items() {
        let idxs = instance.orders_of(item.id);
        if idxs.is_empty() {
            continue;
        }
        // value[k][tau]: indicator mass of the k-th order at period tau.
        let neg = f64::NEG_INFINITY;
        let mut dp: Vec<Vec<f64>> = Vec::with_capacity(idxs.len());
        let mut choice: Vec<Vec<usize>> = Vec::with_capacity(idxs.len());
        for (k, &j) in idxs.iter().enumerate() {
            let mut weights = vec![neg; t_len];
            for &(tau, v) in &model.vars.ri[j] {
                weights[tau] = *solution.var_value(v);
            }
            let mut row = vec![neg; t_len];
            let mut back = vec![0usize; t_len];
            for tau in 0..t_len {
                if weights[tau] == neg {
                    continue;
                }
                if k == 0 {
                    row[tau] = weights[tau];
                } else {
                    // Best predecessor at or before tau; prefer the latest.
                    let mut best = neg;
                    let mut best_at = 0usize;
                    for (p, &val) in dp[k - 1].iter().enumerate().take(tau + 1) {
                        if val >= best {
                            best = val;
                            best_at = p;
                        }
                    }
                    if best == neg {
                        continue;
                    }
                    row[tau] = weights[tau] + best;
                    back[tau] = best_at;
                }
            }
            dp.push(row);
            choice.push(back);
        }
        let last = dp.last()?;
        let mut tau = {
            let mut best = neg;
            let mut at = None;
            for (t, &val) in last.iter().enumerate() {
                if val != neg && val >= best {
                    best = val;
                    at = Some(t);
                }
            }
            at?
        };
        for k in (0..idxs.len()).rev() {
            assignment[idxs[k]] = tau;
            if k > 0 {
                tau = choice[k][tau];
            }
        }
    }
    Some(assignment)
}
