//! Certificate verification by direct recomputation.
//!
//! Replays every model constraint against the plan's numbers without
//! touching any LP machinery: balances, windows, ordering, load couplings,
//! domains, the objective, and the dual-bound sandwich. All residuals are
//! scaled by the magnitude of the terms involved and must stay below 1e-6.

use super::{CertStatus, ReleaseModelInstance, ReleasePlan, SolveCertificate};

const TOL: f64 = 1e-6;

fn scaled(residual: f64, magnitude: f64) -> f64 {
    residual.abs() / magnitude.abs().max(1.0)
}

/// Passes (`Ok`) or reports the first violated requirement.
pub fn verify_certificate(
    instance: &ReleaseModelInstance,
    plan: &ReleasePlan,
    cert: &SolveCertificate,
) -> Result<(), String> {
    let t_len = instance.horizon();
    let start = instance.start_period();

    // Structure: one release per order, trajectories for every item, grid
    // lengths consistent.
    if plan.releases.len() != instance.orders().len() {
        return Err(format!(
            "plan has {} releases for {} orders",
            plan.releases.len(),
            instance.orders().len()
        ));
    }
    for item in instance.items() {
        let Some(tr) = plan.trajectories.get(&item.id) else {
            return Err(format!("missing trajectory for item {}", item.id));
        };
        let lens = [
            tr.releases.len(),
            tr.wip.len(),
            tr.inventory.len(),
            tr.backlog.len(),
            tr.production.len(),
        ];
        if lens.iter().any(|&l| l != t_len) {
            return Err(format!("item {}: trajectory length mismatch", item.id));
        }
    }
    for series in [&plan.load, &plan.processed_load, &plan.overload] {
        if series.len() != t_len {
            return Err("period series length mismatch".into());
        }
    }

    // Release windows (single-release, window membership).
    let mut assignment = Vec::with_capacity(instance.orders().len());
    for (j, order) in instance.orders().iter().enumerate() {
        let Some(&release) = plan.releases.get(&order.id) else {
            return Err(format!("order {} has no release", order.id));
        };
        if release < start {
            return Err(format!("order {}: release {} before the grid", order.id, release));
        }
        let tau = (release - start) as usize;
        let (lo, hi) = instance.window(j);
        if tau < lo || tau > hi {
            return Err(format!(
                "order {}: release {} outside window [{}, {}]",
                order.id,
                release,
                start + lo as u32,
                start + hi as u32
            ));
        }
        assignment.push(tau);
    }

    // No overtaking within each item.
    for item in instance.items() {
        let idxs = instance.orders_of(item.id);
        for pair in idxs.windows(2) {
            if assignment[pair[0]] > assignment[pair[1]] {
                return Err(format!(
                    "item {}: order {} (due {}) releases after order {} (due {})",
                    item.id,
                    instance.orders()[pair[0]].id,
                    instance.orders()[pair[0]].due,
                    instance.orders()[pair[1]].id,
                    instance.orders()[pair[1]].due
                ));
            }
        }
    }

    // Release linkage and per-item release mass.
    for item in instance.items() {
        let tr = &plan.trajectories[&item.id];
        let mut expected = vec![0.0; t_len];
        for (j, order) in instance.orders().iter().enumerate() {
            if order.item == item.id {
                expected[assignment[j]] += order.quantity;
            }
        }
        for tau in 0..t_len {
            let res = scaled(tr.releases[tau] - expected[tau], expected[tau]);
            if res > TOL {
                return Err(format!(
                    "item {}: release trajectory at period {} is {}, orders give {}",
                    item.id,
                    start + tau as u32,
                    tr.releases[tau],
                    expected[tau]
                ));
            }
        }
        let mass: f64 = tr.releases.iter().sum();
        let owed: f64 = instance
            .orders()
            .iter()
            .filter(|o| o.item == item.id)
            .map(|o| o.quantity)
            .sum();
        if scaled(mass - owed, owed) > TOL {
            return Err(format!(
                "item {}: total released {} but orders sum to {} (order released more or less than once)",
                item.id, mass, owed
            ));
        }
    }

    // Domains.
    for item in instance.items() {
        let tr = &plan.trajectories[&item.id];
        for series in [&tr.wip, &tr.inventory, &tr.backlog, &tr.production, &tr.releases] {
            if series.iter().any(|&v| v < -TOL) {
                return Err(format!("item {}: negative trajectory value", item.id));
            }
        }
    }
    for series in [&plan.load, &plan.processed_load, &plan.overload] {
        if series.iter().any(|&v| v < -TOL) {
            return Err("negative period aggregate".into());
        }
    }

    // WIP balance: W_t = W_{t−1} + R_t − P_{t−1}.
    for item in instance.items() {
        let tr = &plan.trajectories[&item.id];
        for tau in 0..t_len {
            let prev_w = if tau == 0 { item.initial_wip } else { tr.wip[tau - 1] };
            let prev_p = if tau == 0 { 0.0 } else { tr.production[tau - 1] };
            let rhs = prev_w + tr.releases[tau] - prev_p;
            let mag = prev_w.abs() + tr.releases[tau].abs() + prev_p.abs();
            if scaled(tr.wip[tau] - rhs, mag) > TOL {
                return Err(format!(
                    "item {}: WIP balance broken at period {} ({} vs {})",
                    item.id,
                    start + tau as u32,
                    tr.wip[tau],
                    rhs
                ));
            }
        }
    }

    // Net inventory balance: I_t − B_t = I_{t−1} − B_{t−1} + P_{t−1} − X_t.
    for item in instance.items() {
        let tr = &plan.trajectories[&item.id];
        for tau in 0..t_len {
            let prev = if tau == 0 {
                item.initial_fgi - item.initial_backlog
            } else {
                tr.inventory[tau - 1] - tr.backlog[tau - 1]
            };
            let prev_p = if tau == 0 { 0.0 } else { tr.production[tau - 1] };
            let rhs = prev + prev_p - item.demand[tau];
            let lhs = tr.inventory[tau] - tr.backlog[tau];
            let mag = prev.abs() + prev_p.abs() + item.demand[tau].abs();
            if scaled(lhs - rhs, mag) > TOL {
                return Err(format!(
                    "item {}: inventory balance broken at period {} ({} vs {})",
                    item.id,
                    start + tau as u32,
                    lhs,
                    rhs
                ));
            }
        }
    }

    // Load definitions: processed load and system load with setups charged
    // in the release period.
    let mut setup = vec![0.0; t_len];
    for (j, order) in instance.orders().iter().enumerate() {
        setup[assignment[j]] += instance.items()[instance.item_index(order.item)].setup_time;
    }
    for tau in 0..t_len {
        let mut pl = setup[tau];
        let mut load = setup[tau];
        for item in instance.items() {
            let tr = &plan.trajectories[&item.id];
            pl += item.processing_time * tr.production[tau];
            load += item.processing_time * tr.wip[tau];
        }
        if scaled(plan.processed_load[tau] - pl, pl) > TOL {
            return Err(format!(
                "processed load at period {} is {}, recomputed {}",
                start + tau as u32,
                plan.processed_load[tau],
                pl
            ));
        }
        if scaled(plan.load[tau] - load, load) > TOL {
            return Err(format!(
                "system load at period {} is {}, recomputed {}",
                start + tau as u32,
                plan.load[tau],
                load
            ));
        }
    }

    // Capacity, interior clearing segments, and load cap.
    let mc = instance.capacity();
    for tau in 0..t_len {
        let pl = plan.processed_load[tau];
        let load = plan.load[tau];
        let c = plan.overload[tau];
        if scaled((pl - mc - c).max(0.0), mc) > TOL {
            return Err(format!(
                "capacity exceeded at period {}: PL {} > MC {} + C {}",
                start + tau as u32,
                pl,
                mc,
                c
            ));
        }
        for seg in instance.cf().interior_segments() {
            let bound = seg.slope * load + seg.intercept;
            if scaled((pl - bound).max(0.0), bound) > TOL {
                return Err(format!(
                    "clearing segment violated at period {}: PL {} > {:.6}·L + {:.6} = {}",
                    start + tau as u32,
                    pl,
                    seg.slope,
                    seg.intercept,
                    bound
                ));
            }
        }
        if scaled((pl - load - c).max(0.0), load.max(1.0)) > TOL {
            return Err(format!(
                "processed load exceeds available load at period {}: PL {} > L {} + C {}",
                start + tau as u32,
                pl,
                load,
                c
            ));
        }
    }

    // Objective recomputation.
    let mut objective = 0.0;
    for item in instance.items() {
        let tr = &plan.trajectories[&item.id];
        for tau in 0..t_len {
            objective += item.cost_fgi * tr.inventory[tau]
                + item.cost_wip * tr.wip[tau]
                + item.cost_backlog * tr.backlog[tau];
        }
    }
    objective += instance.overload_penalty() * plan.overload.iter().sum::<f64>();
    if scaled(plan.objective - objective, objective) > TOL {
        return Err(format!(
            "objective mismatch: plan says {}, recomputed {}",
            plan.objective, objective
        ));
    }

    // Dual-bound sandwich and status consistency.
    let scale = plan.objective.abs().max(1.0);
    if cert.lp_dual_bound > plan.objective + TOL * scale {
        return Err(format!(
            "dual bound {} exceeds objective {}",
            cert.lp_dual_bound, plan.objective
        ));
    }
    if plan.objective > cert.lp_dual_bound + cert.gap * scale + TOL * scale {
        return Err(format!(
            "objective {} not within gap {} of dual bound {}",
            plan.objective, cert.gap, cert.lp_dual_bound
        ));
    }
    if cert.status == CertStatus::Optimal && cert.gap > 1e-6 {
        return Err(format!("status optimal but gap is {}", cert.gap));
    }
    Ok(())
}
