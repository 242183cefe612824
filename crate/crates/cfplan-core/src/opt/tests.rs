use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::brute_force_argmin;
use super::*;
use crate::cf::ClearingFunction;
use crate::mrp::{ItemScheduleState, PlannedOrder, ResourceScheduleInput};
use crate::system::build_ps1;

fn ideal(capacity: f64) -> ClearingFunction {
    ClearingFunction::ideal(capacity).unwrap()
}

fn bent(capacity: f64) -> ClearingFunction {
    ClearingFunction::three_segment(capacity, 0.5).unwrap()
}

/// Unit processing, no setup, the bundled end-item cost rates, empty state.
fn plain_item(id: u32, demand: Vec<f64>) -> ItemData {
    ItemData {
        id,
        processing_time: 1.0,
        setup_time: 0.0,
        cost_fgi: 2.0,
        cost_wip: 1.0,
        cost_backlog: 38.0,
        initial_fgi: 0.0,
        initial_backlog: 0.0,
        initial_wip: 0.0,
        demand,
    }
}

fn inst(
    horizon: usize,
    items: Vec<ItemData>,
    orders: Vec<OrderSpec>,
    max_lead: u32,
    cf: ClearingFunction,
) -> ReleaseModelInstance {
    ReleaseModelInstance::new(1, horizon, items, orders, max_lead, false, cf).unwrap()
}

fn assert_close(a: f64, b: f64, what: &str) {
    let tol = 1e-6 * a.abs().max(1.0);
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
}

#[test]
fn binary_count_is_total_window_width() {
    let item = plain_item(1, vec![0.0; 6]);
    let i = inst(
        6,
        vec![item],
        vec![OrderSpec { id: 1, item: 1, quantity: 5.0, due: 5 }],
        3,
        ideal(1e6),
    );
    assert_eq!(i.window(0), (1, 3));
    assert_eq!(i.binary_variable_count(), 3);

    // Release allowed in the due period itself widens the window by one.
    let item = plain_item(1, vec![0.0; 6]);
    let i = ReleaseModelInstance::new(
        1,
        6,
        vec![item],
        vec![OrderSpec { id: 1, item: 1, quantity: 5.0, due: 3 }],
        2,
        true,
        ideal(1e6),
    )
    .unwrap();
    assert_eq!(i.window(0), (0, 2));
    assert_eq!(i.binary_variable_count(), 3);
}

#[test]
fn continuous_count_covers_model_template() {
    let items = vec![plain_item(1, vec![0.0; 8]), plain_item(2, vec![0.0; 8])];
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 5.0, due: 4 },
        OrderSpec { id: 2, item: 2, quantity: 5.0, due: 6 },
    ];
    let i = inst(8, items, orders, 3, ideal(1e6));
    assert_eq!(i.continuous_variable_count(), 8 * (5 * 2 + 3));
}

#[test]
fn due_at_grid_start_needs_due_period_release() {
    let mk = |until_due: bool| {
        ReleaseModelInstance::new(
            1,
            4,
            vec![plain_item(1, vec![0.0; 4])],
            vec![OrderSpec { id: 1, item: 1, quantity: 5.0, due: 1 }],
            2,
            until_due,
            ideal(1e6),
        )
    };
    assert!(matches!(mk(false), Err(Error::Validation(_))));
    let i = mk(true).unwrap();
    assert_eq!(i.window(0), (0, 0));
}

#[test]
fn overload_penalty_prices_far_above_holding() {
    let items =
        vec![plain_item(1, vec![0.0; 4]), plain_item(2, vec![0.0; 4])];
    let i = inst(
        4,
        items,
        vec![OrderSpec { id: 1, item: 1, quantity: 5.0, due: 3 }],
        2,
        ideal(1e6),
    );
    // Two items holding 2.0 each, factor 1000.
    assert_eq!(i.overload_penalty(), 4000.0);
}

#[test]
fn build_instance_wires_state_costs_and_penalty() {
    let system = build_ps1();
    let mut states = BTreeMap::new();
    for id in [100u32, 101] {
        states.insert(
            id,
            ItemScheduleState {
                initial_fgi: 10.0,
                initial_backlog: 0.0,
                initial_wip: 3.0,
                demand_schedule: vec![40.0; 14],
            },
        );
    }
    let input = ResourceScheduleInput {
        resource: system.resource("M1.1").unwrap(),
        now: 5,
        horizon: 14,
        item_states: states,
    };
    let orders = vec![PlannedOrder {
        id: 9,
        item: 100,
        quantity: 40.0,
        due_period: 8,
        release_period: 8,
        released: false,
    }];
    let cf = ideal(1440.0);
    let config = OptimizerConfig::default();
    let i = build_instance(&input, &orders, &system, &cf, &config).unwrap();
    assert_eq!(i.start_period(), 5);
    assert_eq!(i.overload_penalty(), 4000.0);
    let end = i.items().iter().find(|d| d.id == 100).unwrap();
    assert_eq!(end.cost_backlog, 38.0);
    assert_eq!(end.initial_wip, 3.0);
    assert_eq!(end.setup_time, 72.0);

    // Component machine: items carry no backlog rate of their own, the
    // configured penalty substitutes inside the model.
    let mut states = BTreeMap::new();
    for id in [200u32, 201] {
        states.insert(
            id,
            ItemScheduleState {
                initial_fgi: 0.0,
                initial_backlog: 0.0,
                initial_wip: 0.0,
                demand_schedule: vec![40.0; 14],
            },
        );
    }
    let input = ResourceScheduleInput {
        resource: system.resource("M2.1").unwrap(),
        now: 5,
        horizon: 14,
        item_states: states,
    };
    let orders = vec![PlannedOrder {
        id: 1,
        item: 200,
        quantity: 40.0,
        due_period: 7,
        release_period: 7,
        released: false,
    }];
    let config = OptimizerConfig { component_backlog_penalty: 99.0, ..Default::default() };
    let i = build_instance(&input, &orders, &system, &cf, &config).unwrap();
    for d in i.items() {
        assert_eq!(d.cost_backlog, 99.0, "component {}", d.id);
    }
}

#[test]
fn single_order_releases_latest_and_matches_oracle() {
    let mut demand = vec![0.0; 6];
    demand[4] = 10.0;
    let i = inst(
        6,
        vec![plain_item(1, demand)],
        vec![OrderSpec { id: 7, item: 1, quantity: 10.0, due: 5 }],
        3,
        ideal(1e6),
    );
    let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
    assert_eq!(plan.releases, BTreeMap::from([(7u64, 4u32)]));
    assert_close(plan.objective, 10.0, "one period of WIP");
    let traj = &plan.trajectories[&1];
    assert_close(traj.wip[3], 10.0, "WIP in the release period");
    assert_close(traj.production[3], 10.0, "production meets the due date");
    verify_certificate(&i, &plan, &cert).unwrap();

    let (releases, obj) = brute_force_argmin(&i).unwrap();
    assert_close(plan.objective, obj, "solver vs enumeration");
    assert_eq!(plan.releases, releases);
}

#[test]
fn fast_path_returns_a_zero_gap_certificate() {
    let mut demand = vec![0.0; 6];
    demand[4] = 10.0;
    let i = inst(
        6,
        vec![plain_item(1, demand)],
        vec![OrderSpec { id: 7, item: 1, quantity: 10.0, due: 5 }],
        3,
        ideal(1e6),
    );
    let (_, cert) = solve(&i, &SolveLimits::default()).unwrap();
    assert_eq!(cert.status, CertStatus::Optimal);
    assert_eq!(cert.gap, 0.0);
    assert_eq!(cert.nodes_explored, 1);
}

#[test]
fn consecutive_orders_never_overtake() {
    // The small early order would prefer a later release than the big one
    // that must start early for capacity; ordering by due date forbids that.
    let mut demand = vec![0.0; 6];
    demand[3] = 5.0;
    demand[4] = 30.0;
    let mut item = plain_item(1, demand);
    item.processing_time = 1.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 5.0, due: 4 },
        OrderSpec { id: 2, item: 1, quantity: 30.0, due: 5 },
    ];
    let i = inst(6, vec![item], orders, 3, ideal(10.0));
    let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
    verify_certificate(&i, &plan, &cert).unwrap();
    assert!(plan.releases[&1] <= plan.releases[&2]);
    let oracle_obj = brute_force_oracle(&i).unwrap();
    assert_close(plan.objective, oracle_obj, "solver vs enumeration");
}

#[test]
fn overload_is_priced_not_hidden() {
    // 50 minutes of work, 10 minutes of capacity per period, and a backlog
    // rate so punishing that paying the overload premium is the optimum.
    let mut demand = vec![0.0; 4];
    demand[2] = 50.0;
    let mut item = plain_item(1, demand);
    item.cost_backlog = 10_000.0;
    let i = inst(
        4,
        vec![item],
        vec![OrderSpec { id: 1, item: 1, quantity: 50.0, due: 3 }],
        2,
        ideal(10.0),
    );
    let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
    verify_certificate(&i, &plan, &cert).unwrap();
    let total_overload: f64 = plan.overload.iter().sum();
    assert!(total_overload > 1e-6, "expected overload, got {total_overload}");
    assert!(plan.objective >= i.overload_penalty() * total_overload - 1e-6);
    let oracle_obj = brute_force_oracle(&i).unwrap();
    assert_close(plan.objective, oracle_obj, "solver vs enumeration");
}

#[test]
fn ample_capacity_needs_no_overload() {
    let mut demand = vec![0.0; 6];
    demand[2] = 20.0;
    demand[4] = 25.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 20.0, due: 3 },
        OrderSpec { id: 2, item: 1, quantity: 25.0, due: 5 },
    ];
    let i = inst(6, vec![plain_item(1, demand)], orders, 3, ideal(1e5));
    let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
    verify_certificate(&i, &plan, &cert).unwrap();
    for (tau, c) in plan.overload.iter().enumerate() {
        assert!(*c <= 1e-9, "overload {c} at period {tau}");
    }
    for tau in 0..i.horizon() {
        let cap = plan.load[tau].min(i.capacity()) + 1e-6;
        assert!(plan.processed_load[tau] <= cap, "clearing violated at {tau}");
    }
}

#[test]
fn objective_scales_with_quantities() {
    let build = |k: f64| {
        let mut demand = vec![0.0; 6];
        demand[2] = 12.0 * k;
        demand[4] = 17.0 * k;
        let mut item = plain_item(1, demand);
        item.initial_fgi = 2.0 * k;
        item.initial_wip = 3.0 * k;
        let orders = vec![
            OrderSpec { id: 1, item: 1, quantity: 12.0 * k, due: 3 },
            OrderSpec { id: 2, item: 1, quantity: 17.0 * k, due: 5 },
        ];
        inst(6, vec![item], orders, 3, bent(150.0 * k))
    };
    let (a, _) = solve(&build(1.0), &SolveLimits::default()).unwrap();
    let (b, _) = solve(&build(10.0), &SolveLimits::default()).unwrap();
    assert_eq!(a.releases, b.releases);
    assert!(
        (b.objective - 10.0 * a.objective).abs() <= 1e-9 * b.objective.abs().max(1.0),
        "scaled objective {} vs {}",
        b.objective,
        10.0 * a.objective
    );
}

#[test]
fn more_capacity_never_costs_more() {
    let mut demand = vec![0.0; 8];
    demand[2] = 100.0;
    demand[4] = 120.0;
    demand[6] = 90.0;
    let mut item = plain_item(1, demand.clone());
    item.processing_time = 2.0;
    item.setup_time = 10.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 100.0, due: 3 },
        OrderSpec { id: 2, item: 1, quantity: 120.0, due: 5 },
        OrderSpec { id: 3, item: 1, quantity: 90.0, due: 7 },
    ];
    let mut last = f64::INFINITY;
    for cap in [500.0, 1000.0, 2000.0] {
        let i = inst(8, vec![item.clone()], orders.clone(), 3, bent(cap));
        let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
        verify_certificate(&i, &plan, &cert).unwrap();
        assert!(
            plan.objective <= last + 1e-9 * last.abs().max(1.0),
            "capacity {cap} raised cost {last} -> {}",
            plan.objective
        );
        last = plan.objective;
    }
}

#[test]
fn no_orders_instance_carries_static_cost() {
    let mut item = plain_item(1, vec![0.0; 5]);
    item.initial_fgi = 7.0;
    let i = inst(5, vec![item], vec![], 3, ideal(1e4));
    let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
    verify_certificate(&i, &plan, &cert).unwrap();
    assert_close(plan.objective, 5.0 * 2.0 * 7.0, "held FGI");
    assert_close(brute_force_oracle(&i).unwrap(), plan.objective, "oracle");

    let mut item = plain_item(1, vec![0.0; 5]);
    item.initial_backlog = 3.0;
    let i = inst(5, vec![item], vec![], 3, ideal(1e4));
    let (plan, _) = solve(&i, &SolveLimits::default()).unwrap();
    assert_close(plan.objective, 5.0 * 38.0 * 3.0, "carried backlog");
    assert_close(brute_force_oracle(&i).unwrap(), plan.objective, "oracle");
}

#[test]
fn cost_equal_optima_release_latest() {
    // All rates zero: every assignment costs 0 and the enumeration's tie
    // rule alone decides, pinning each release to its window's last period.
    let mut item = plain_item(1, vec![0.0; 6]);
    item.cost_fgi = 0.0;
    item.cost_wip = 0.0;
    item.cost_backlog = 0.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 5.0, due: 4 },
        OrderSpec { id: 2, item: 1, quantity: 5.0, due: 5 },
    ];
    let i = inst(6, vec![item], orders, 2, ideal(1e4));
    let (releases, obj) = brute_force_argmin(&i).unwrap();
    assert_eq!(releases, BTreeMap::from([(1u64, 3u32), (2u64, 4u32)]));
    assert_close(obj, 0.0, "free plan");
}

#[test]
fn positive_wip_cost_forces_latest_release() {
    let mut demand = vec![0.0; 6];
    demand[3] = 5.0;
    demand[4] = 5.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 5.0, due: 4 },
        OrderSpec { id: 2, item: 1, quantity: 5.0, due: 5 },
    ];
    let i = inst(6, vec![plain_item(1, demand)], orders, 2, ideal(1e4));
    let (plan, _) = solve(&i, &SolveLimits::default()).unwrap();
    let expected = BTreeMap::from([(1u64, 3u32), (2u64, 4u32)]);
    assert_eq!(plan.releases, expected);
    let (releases, obj) = brute_force_argmin(&i).unwrap();
    assert_eq!(releases, expected);
    assert_close(plan.objective, obj, "solver vs enumeration");
}

#[test]
fn verifier_rejects_corrupted_plans() {
    let mut demand = vec![0.0; 6];
    demand[3] = 8.0;
    demand[4] = 12.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 8.0, due: 4 },
        OrderSpec { id: 2, item: 1, quantity: 12.0, due: 5 },
    ];
    let i = inst(6, vec![plain_item(1, demand)], orders, 3, bent(30.0));
    let (plan, cert) = solve(&i, &SolveLimits::default()).unwrap();
    verify_certificate(&i, &plan, &cert).unwrap();

    let mut bad = plan.clone();
    bad.releases.insert(1, 6);
    assert!(verify_certificate(&i, &bad, &cert).is_err(), "release outside window");

    let mut bad = plan.clone();
    bad.objective += 1.0;
    assert!(verify_certificate(&i, &bad, &cert).is_err(), "objective mismatch");

    let mut bad = plan.clone();
    bad.trajectories.get_mut(&1).unwrap().wip[1] += 0.5;
    assert!(verify_certificate(&i, &bad, &cert).is_err(), "WIP balance");

    let mut bad = plan.clone();
    let tau = (plan.releases[&1] - 1) as usize;
    bad.trajectories.get_mut(&1).unwrap().releases[tau] += 8.0;
    assert!(verify_certificate(&i, &bad, &cert).is_err(), "release mass");

    let mut bad_cert = cert.clone();
    bad_cert.lp_dual_bound = plan.objective + 1.0;
    assert!(verify_certificate(&i, &plan, &bad_cert).is_err(), "dual above objective");
}

#[test]
fn repeated_solves_are_bit_identical() {
    let mut demand = vec![0.0; 6];
    demand[2] = 9.0;
    demand[4] = 14.0;
    let orders = vec![
        OrderSpec { id: 1, item: 1, quantity: 9.0, due: 3 },
        OrderSpec { id: 2, item: 1, quantity: 14.0, due: 5 },
    ];
    let i = inst(6, vec![plain_item(1, demand)], orders, 3, bent(25.0));
    let (plan_a, cert_a) = solve(&i, &SolveLimits::default()).unwrap();
    let (plan_b, cert_b) = solve(&i, &SolveLimits::default()).unwrap();
    assert_eq!(plan_a, plan_b);
    assert_eq!(cert_a, cert_b);

    // The text round trip preserves every f64 bit, so solving the reloaded
    // instance reproduces the plan exactly.
    let reloaded = parse_instance(&dump_instance(&i)).unwrap();
    let (plan_c, _) = solve(&reloaded, &SolveLimits::default()).unwrap();
    assert_eq!(plan_a, plan_c);
}

fn random_instance(seed: u64) -> ReleaseModelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.random_range(3..=6usize);
    let n_items = rng.random_range(1..=2usize);
    let mut items = Vec::new();
    for k in 0..n_items {
        let mut demand = vec![0.0; horizon];
        for d in demand.iter_mut() {
            if rng.random_bool(0.6) {
                *d = rng.random_range(0.0..25.0);
            }
        }
        items.push(ItemData {
            id: 10 + k as u32,
            processing_time: rng.random_range(0.5..3.0),
            setup_time: if rng.random_bool(0.5) { 4.0 } else { 0.0 },
            cost_fgi: rng.random_range(1.0..3.0),
            cost_wip: rng.random_range(0.2..1.0),
            cost_backlog: rng.random_range(5.0..40.0),
            initial_fgi: if rng.random_bool(0.5) { rng.random_range(0.0..15.0) } else { 0.0 },
            initial_backlog: if rng.random_bool(0.3) { rng.random_range(0.0..10.0) } else { 0.0 },
            initial_wip: if rng.random_bool(0.5) { rng.random_range(0.0..10.0) } else { 0.0 },
            demand,
        });
    }
    let n_orders = rng.random_range(1..=3usize);
    let orders = (0..n_orders)
        .map(|j| OrderSpec {
            id: j as u64 + 1,
            item: 10 + rng.random_range(0..n_items) as u32,
            quantity: rng.random_range(1.0..20.0),
            due: 1 + rng.random_range(1..horizon) as u32,
        })
        .collect();
    let max_lead = rng.random_range(1..=3u32);
    let capacity = rng.random_range(60.0..4000.0);
    let cf = if rng.random_bool(0.5) {
        ideal(capacity)
    } else {
        ClearingFunction::three_segment(capacity, rng.random_range(0.3..0.8)).unwrap()
    };
    ReleaseModelInstance::new(1, horizon, items, orders, max_lead, false, cf).unwrap()
}

#[test]
fn solver_matches_enumeration_on_random_instances() {
    for seed in 0..40u64 {
        let i = random_instance(0xC0FFEE ^ seed);
        let (plan, cert) = solve(&i, &SolveLimits::default())
            .unwrap_or_else(|e| panic!("seed {seed}: solve failed: {e}"));
        verify_certificate(&i, &plan, &cert)
            .unwrap_or_else(|e| panic!("seed {seed}: certificate rejected: {e}"));
        assert_eq!(cert.status, CertStatus::Optimal, "seed {seed}");
        let oracle_obj = brute_force_oracle(&i)
            .unwrap_or_else(|e| panic!("seed {seed}: enumeration failed: {e}"));
        let tol = 1e-6 * plan.objective.abs().max(1.0);
        assert!(
            (plan.objective - oracle_obj).abs() <= tol,
            "seed {seed}: solver {} vs enumeration {oracle_obj}",
            plan.objective
        );
    }
}

#[test]
fn optimizer_schedules_planned_orders_in_place() {
    let system = build_ps1();
    let mut states = BTreeMap::new();
    let mut demand = vec![0.0; 14];
    for d in demand.iter_mut().take(10) {
        *d = 40.0;
    }
    for id in [100u32, 101] {
        states.insert(
            id,
            ItemScheduleState {
                initial_fgi: 40.0,
                initial_backlog: 0.0,
                initial_wip: 0.0,
                demand_schedule: demand.clone(),
            },
        );
    }
    let input = ResourceScheduleInput {
        resource: system.resource("M1.1").unwrap(),
        now: 1,
        horizon: 14,
        item_states: states,
    };
    let mut orders = Vec::new();
    for (k, due) in [3u32, 5, 4].iter().enumerate() {
        orders.push(PlannedOrder {
            id: k as u64 + 1,
            item: if k == 2 { 101 } else { 100 },
            quantity: 40.0,
            due_period: *due,
            release_period: *due,
            released: false,
        });
    }
    let mut optimizer = CfOptimizer::new(
        &system,
        crate::cf::CfConfig::Ideal,
        OptimizerConfig::default(),
    );
    optimizer.schedule_releases(&input, &mut orders).unwrap();
    for o in &orders {
        assert!(o.release_period >= 1 && o.release_period <= o.due_period, "{o:?}");
    }
    let certs = optimizer.take_certificates();
    assert_eq!(certs.len(), 1);
    assert_eq!(certs[0].0, "M1.1");
    assert_eq!(certs[0].1.status, CertStatus::Optimal);
    assert!(optimizer.take_certificates().is_empty());
}
