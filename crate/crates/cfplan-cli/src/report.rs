//! Aggregation and best-parameter selection over result rows.
//!
//! Rows aggregate per scenario (mean over successful replications), then the
//! minimum-mean-cost parameterization is selected per experiment group: one
//! winner per demand behavior × utilization × planning mode, and one per
//! clearing-function level for the lead-time summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use cfplan_core::mrp::PlanningMode;

use crate::grid::ScenarioRow;

/// Per-scenario means over the replications that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAggregate {
    pub alpha: f64,
    pub beta: f64,
    pub utilization: f64,
    pub mode: PlanningMode,
    pub plt: Option<u32>,
    pub cf: Option<String>,
    pub fop: u32,
    pub safety_stock: f64,
    pub reps_total: u32,
    pub reps_ok: u32,
    pub mean_cost: f64,
    pub mean_fgi: f64,
    pub mean_wip: f64,
    pub mean_tardiness: f64,
    pub mean_service: f64,
    pub mean_aplt: f64,
    /// Per-replication overall costs in replication order (successful runs
    /// only), for pairing and interval work downstream.
    pub rep_costs: Vec<f64>,
}

/// Scenario identity independent of scenario ids, so rows from separate runs
/// can be pooled. Floats are keyed by bit pattern; all grid values are finite
/// and nonnegative, where that ordering matches numeric order.
type ScenarioKey = (u64, u64, u64, u8, u32, String, u32, u64);

fn key_of(row: &ScenarioRow) -> ScenarioKey {
    (
        row.alpha.to_bits(),
        row.beta.to_bits(),
        row.utilization.to_bits(),
        match row.mode {
            PlanningMode::MrpBackward => 0,
            PlanningMode::CfOptimized => 1,
        },
        row.plt.unwrap_or(0),
        row.cf.clone().unwrap_or_default(),
        row.fop,
        row.safety_stock.to_bits(),
    )
}

/// Group rows into per-scenario aggregates. Order is deterministic in the
/// scenario parameters, not in row order.
pub fn aggregate(rows: &[ScenarioRow]) -> Vec<ScenarioAggregate> {
    let mut groups: BTreeMap<ScenarioKey, Vec<&ScenarioRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(key_of(row)).or_default().push(row);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (_, mut members) in groups {
        members.sort_by_key(|r| (r.replication, r.row_id));
        let first = members[0];
        let ok: Vec<&&ScenarioRow> = members.iter().filter(|r| r.is_ok()).collect();
        let n = ok.len() as f64;
        let mean = |f: &dyn Fn(&ScenarioRow) -> f64| -> f64 {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / n
            }
        };
        out.push(ScenarioAggregate {
            alpha: first.alpha,
            beta: first.beta,
            utilization: first.utilization,
            mode: first.mode,
            plt: first.plt,
            cf: first.cf.clone(),
            fop: first.fop,
            safety_stock: first.safety_stock,
            reps_total: members.len() as u32,
            reps_ok: ok.len() as u32,
            mean_cost: mean(&|r| r.cost_per_period.unwrap_or(f64::NAN)),
            mean_fgi: mean(&|r| r.fgi_cost.unwrap_or(f64::NAN)),
            mean_wip: mean(&|r| r.wip_cost.unwrap_or(f64::NAN)),
            mean_tardiness: mean(&|r| r.tardiness_cost.unwrap_or(f64::NAN)),
            mean_service: mean(&|r| r.service_level.unwrap_or(f64::NAN)),
            mean_aplt: mean(&|r| r.aplt_mean.unwrap_or(f64::NAN)),
            rep_costs: ok.iter().filter_map(|r| r.cost_per_period).collect(),
        });
    }
    out
}

/// The winning parameterization of one experiment group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRow {
    pub alpha: f64,
    pub beta: f64,
    pub utilization: f64,
    pub mode: PlanningMode,
    pub plt: Option<u32>,
    pub cf: Option<String>,
    pub fop: u32,
    pub safety_stock: f64,
    pub reps_ok: u32,
    pub mean_cost: f64,
    pub mean_fgi: f64,
    pub mean_wip: f64,
    pub mean_tardiness: f64,
    pub mean_service: f64,
    pub mean_aplt: f64,
}

fn best_row_of(agg: &ScenarioAggregate) -> BestRow {
    BestRow {
        alpha: agg.alpha,
        beta: agg.beta,
        utilization: agg.utilization,
        mode: agg.mode,
        plt: agg.plt,
        cf: agg.cf.clone(),
        fop: agg.fop,
        safety_stock: agg.safety_stock,
        reps_ok: agg.reps_ok,
        mean_cost: agg.mean_cost,
        mean_fgi: agg.mean_fgi,
        mean_wip: agg.mean_wip,
        mean_tardiness: agg.mean_tardiness,
        mean_service: agg.mean_service,
        mean_aplt: agg.mean_aplt,
    }
}

fn select_best<K: Ord + Clone>(
    aggs: &[ScenarioAggregate],
    group_key: impl Fn(&ScenarioAggregate) -> Option<K>,
    describe: impl Fn(&K) -> String,
) -> (Vec<BestRow>, Vec<String>) {
    let mut groups: BTreeMap<K, Vec<&ScenarioAggregate>> = BTreeMap::new();
    for agg in aggs {
        if let Some(k) = group_key(agg) {
            groups.entry(k).or_default().push(agg);
        }
    }
    let mut best = Vec::new();
    let mut warnings = Vec::new();
    for (key, members) in groups {
        let winner = members
            .iter()
            .filter(|a| a.reps_ok > 0)
            .min_by(|a, b| a.mean_cost.partial_cmp(&b.mean_cost).expect("finite means"));
        match winner {
            Some(agg) => best.push(best_row_of(agg)),
            None => warnings.push(format!(
                "group {} has no successful replications and was omitted",
                describe(&key)
            )),
        }
    }
    (best, warnings)
}

/// Minimum-mean-cost parameterization per demand behavior × utilization ×
/// planning mode. Groups whose every replication failed are omitted and
/// reported in the warning list.
pub fn select_min_cost(aggs: &[ScenarioAggregate]) -> (Vec<BestRow>, Vec<String>) {
    select_best(
        aggs,
        |a| {
            Some((
                a.alpha.to_bits(),
                a.beta.to_bits(),
                a.utilization.to_bits(),
                match a.mode {
                    PlanningMode::MrpBackward => 0u8,
                    PlanningMode::CfOptimized => 1,
                },
            ))
        },
        |k| {
            format!(
                "alpha {} beta {} utilization {} mode {}",
                f64::from_bits(k.0),
                f64::from_bits(k.1),
                f64::from_bits(k.2),
                if k.3 == 0 { "mrp-backward" } else { "cf-optimized" }
            )
        },
    )
}

/// Minimum-mean-cost parameterization per demand behavior × utilization ×
/// clearing-function level, optimizer rows only: the data behind lead-time
/// comparisons across clearing functions.
pub fn select_min_cost_by_cf(aggs: &[ScenarioAggregate]) -> (Vec<BestRow>, Vec<String>) {
    select_best(
        aggs,
        |a| {
            a.cf.as_ref().map(|cf| {
                (a.alpha.to_bits(), a.beta.to_bits(), a.utilization.to_bits(), cf.clone())
            })
        },
        |k| {
            format!(
                "alpha {} beta {} utilization {} cf {}",
                f64::from_bits(k.0),
                f64::from_bits(k.1),
                f64::from_bits(k.2),
                k.3
            )
        },
    )
}

pub fn best_rows_to_csv(rows: &[BestRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Per-group best cost in tidy form: one row per demand behavior ×
/// utilization × mode, ready to plot cost against demand variability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostByDemandRow {
    pub alpha: f64,
    pub beta: f64,
    pub utilization: f64,
    pub mode: PlanningMode,
    pub mean_cost: f64,
    pub mean_service: f64,
    pub mean_aplt: f64,
}

pub fn cost_by_demand(best: &[BestRow]) -> Vec<CostByDemandRow> {
    best.iter()
        .map(|b| CostByDemandRow {
            alpha: b.alpha,
            beta: b.beta,
            utilization: b.utilization,
            mode: b.mode,
            mean_cost: b.mean_cost,
            mean_service: b.mean_service,
            mean_aplt: b.mean_aplt,
        })
        .collect()
}

pub fn cost_by_demand_to_csv(rows: &[CostByDemandRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Fixed-width text table of best rows for terminal output.
pub fn render_table(best: &[BestRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6} {:>5} {:>5} {:<13} {:>4} {:<10} {:>4} {:>5} {:>10} {:>8} {:>6}\n",
        "alpha", "beta", "util", "mode", "plt", "cf", "fop", "ss", "cost", "service", "aplt"
    ));
    for b in best {
        out.push_str(&format!(
            "{:>6} {:>5} {:>5} {:<13} {:>4} {:<10} {:>4} {:>5} {:>10.2} {:>8.4} {:>6.2}\n",
            b.alpha,
            b.beta,
            b.utilization,
            match b.mode {
                PlanningMode::MrpBackward => "mrp-backward",
                PlanningMode::CfOptimized => "cf-optimized",
            },
            b.plt.map_or("-".into(), |p| p.to_string()),
            b.cf.as_deref().unwrap_or("-"),
            b.fop,
            b.safety_stock,
            b.mean_cost,
            b.mean_service,
            b.mean_aplt,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        scenario_id: u32,
        replication: u32,
        mode: PlanningMode,
        fop: u32,
        cost: Option<f64>,
    ) -> ScenarioRow {
        ScenarioRow {
            row_id: scenario_id as u64 * 10 + replication as u64,
            scenario_id,
            replication,
            seed: replication as u64,
            status: if cost.is_some() { "ok".into() } else { "error: boom".into() },
            system: "ps1".into(),
            alpha: 0.5,
            beta: 0.0,
            utilization: 0.85,
            demand_rate: 44.12,
            mode,
            plt: (mode == PlanningMode::MrpBackward).then_some(1),
            cf: (mode == PlanningMode::CfOptimized).then(|| "ideal".to_string()),
            fop,
            safety_stock: 0.0,
            setup_cv: 0.2,
            run_length: 50,
            warmup: 10,
            periods: cost.map(|_| 40),
            cost_per_period: cost,
            fgi_cost: cost.map(|c| c * 0.5),
            wip_cost: cost.map(|c| c * 0.3),
            tardiness_cost: cost.map(|c| c * 0.2),
            service_level: cost.map(|_| 0.97),
            aplt_mean: cost.map(|_| 1.5),
            certificates: None,
            max_cert_gap: None,
        }
    }

    #[test]
    fn single_row_groups_select_that_row() {
        let rows = vec![row(0, 0, PlanningMode::MrpBackward, 1, Some(500.0))];
        let aggs = aggregate(&rows);
        let (best, warnings) = select_min_cost(&aggs);
        assert!(warnings.is_empty());
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].mean_cost, 500.0);
        assert_eq!(best[0].reps_ok, 1);
    }

    #[test]
    fn known_minimum_is_selected_within_a_group() {
        let rows = vec![
            row(0, 0, PlanningMode::MrpBackward, 1, Some(500.0)),
            row(0, 1, PlanningMode::MrpBackward, 1, Some(520.0)),
            row(1, 0, PlanningMode::MrpBackward, 2, Some(480.0)),
            row(1, 1, PlanningMode::MrpBackward, 2, Some(490.0)),
            row(2, 0, PlanningMode::MrpBackward, 3, Some(700.0)),
            row(2, 1, PlanningMode::MrpBackward, 3, Some(700.0)),
        ];
        let aggs = aggregate(&rows);
        let (best, _) = select_min_cost(&aggs);
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].fop, 2);
        assert_eq!(best[0].mean_cost, 485.0);
    }

    #[test]
    fn group_means_match_direct_recomputation() {
        let costs = [512.25, 498.75, 530.5, 505.0];
        let rows: Vec<ScenarioRow> = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| row(0, i as u32, PlanningMode::MrpBackward, 1, Some(c)))
            .collect();
        let aggs = aggregate(&rows);
        assert_eq!(aggs.len(), 1);
        let direct = costs.iter().sum::<f64>() / costs.len() as f64;
        assert!((aggs[0].mean_cost - direct).abs() <= 1e-9);
        assert_eq!(aggs[0].rep_costs, costs.to_vec());
    }

    #[test]
    fn failed_replications_are_excluded_and_empty_groups_warned() {
        let rows = vec![
            row(0, 0, PlanningMode::MrpBackward, 1, Some(500.0)),
            row(0, 1, PlanningMode::MrpBackward, 1, None),
            row(1, 0, PlanningMode::CfOptimized, 1, None),
            row(1, 1, PlanningMode::CfOptimized, 1, None),
        ];
        let aggs = aggregate(&rows);
        let mrp = aggs.iter().find(|a| a.mode == PlanningMode::MrpBackward).unwrap();
        assert_eq!((mrp.reps_total, mrp.reps_ok), (2, 1));
        assert_eq!(mrp.mean_cost, 500.0);
        let (best, warnings) = select_min_cost(&aggs);
        assert_eq!(best.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("cf-optimized"), "{}", warnings[0]);
    }

    #[test]
    fn cf_level_selection_groups_by_clearing_function() {
        let mut a = row(0, 0, PlanningMode::CfOptimized, 1, Some(400.0));
        a.cf = Some("ideal".into());
        let mut b = row(1, 0, PlanningMode::CfOptimized, 1, Some(380.0));
        b.cf = Some("ideal".into());
        b.fop = 2;
        let mut c = row(2, 0, PlanningMode::CfOptimized, 1, Some(650.0));
        c.cf = Some("seg3-0.40".into());
        let d = row(3, 0, PlanningMode::MrpBackward, 1, Some(390.0));
        let aggs = aggregate(&[a, b, c, d]);
        let (best, warnings) = select_min_cost_by_cf(&aggs);
        assert!(warnings.is_empty());
        assert_eq!(best.len(), 2);
        let ideal = best.iter().find(|b| b.cf.as_deref() == Some("ideal")).unwrap();
        assert_eq!((ideal.mean_cost, ideal.fop), (380.0, 2));
        assert!(best.iter().any(|b| b.cf.as_deref() == Some("seg3-0.40")));
    }

    #[test]
    fn tables_and_csv_render_optional_columns() {
        let rows = vec![
            row(0, 0, PlanningMode::MrpBackward, 1, Some(500.0)),
            row(1, 0, PlanningMode::CfOptimized, 1, Some(450.0)),
        ];
        let (best, _) = select_min_cost(&aggregate(&rows));
        let csv = best_rows_to_csv(&best);
        assert!(csv.starts_with("alpha,beta,utilization,mode,plt,cf,fop,safety_stock"));
        assert!(csv.contains("mrp-backward,1,,1"), "{csv}");
        assert!(csv.contains("cf-optimized,,ideal,1"), "{csv}");
        let table = render_table(&best);
        assert!(table.contains("mrp-backward"));
        let tidy = cost_by_demand_to_csv(&cost_by_demand(&best));
        assert_eq!(tidy.lines().count(), 3);
    }
}
