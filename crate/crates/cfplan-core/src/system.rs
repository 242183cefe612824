//! Items, BOM, resources and routing: the static description of a production
//! system, plus the two bundled multi-stage systems (PS1, PS2) and planned
//! utilization arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type ItemId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    EndItem,
    Component,
    RawMaterial,
}

impl ItemKind {
    pub fn is_raw(self) -> bool {
        self == ItemKind::RawMaterial
    }
}

/// One item (end item, component, or raw material) with its routing times and
/// holding/backorder cost rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub kind: ItemKind,
    /// Minutes of machine time per unit. Zero for raw materials.
    pub processing_time: f64,
    /// Minutes of setup per production lot. Zero for raw materials.
    pub setup_time_mean: f64,
    /// Finished-goods holding cost per unit per period.
    pub cost_fgi: f64,
    /// Work-in-progress holding cost per unit per period.
    pub cost_wip: f64,
    /// Backorder cost per unit per period; positive for end items only.
    pub cost_backlog: f64,
}

/// `quantity_per` units of `child` are consumed per unit of `parent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BomEdge {
    pub parent: ItemId,
    pub child: ItemId,
    pub quantity_per: f64,
}

/// A single-server machine with a per-period capacity in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    pub capacity_minutes: f64,
    /// Items produced on this machine, sorted by id.
    pub items: Vec<ItemId>,
}

/// Validated, immutable production system.
///
/// Construction computes low-level codes and checks every structural
/// invariant; afterwards the system is safe to share read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionSystem {
    name: String,
    items: Vec<Item>,          // sorted by id
    bom: Vec<BomEdge>,         // sorted by (parent, child)
    resources: Vec<Resource>,  // sorted by id
    llc: BTreeMap<ItemId, u32>,
}

impl ProductionSystem {
    pub fn new(
        name: impl Into<String>,
        mut items: Vec<Item>,
        mut bom: Vec<BomEdge>,
        mut resources: Vec<Resource>,
    ) -> Result<Self> {
        items.sort_by_key(|i| i.id);
        bom.sort_by(|a, b| (a.parent, a.child).cmp(&(b.parent, b.child)));
        resources.sort_by(|a, b| a.id.cmp(&b.id));
        for r in &mut resources {
            r.items.sort_unstable();
        }

        let ids: BTreeSet<ItemId> = items.iter().map(|i| i.id).collect();
        if ids.len() != items.len() {
            return Err(Error::Validation("duplicate item ids".into()));
        }

        for item in &items {
            let is_raw = item.kind.is_raw();
            if !is_raw && !(item.processing_time > 0.0) {
                return Err(Error::Validation(format!(
                    "item {}: processing time must be positive for non-raw items",
                    item.id
                )));
            }
            if item.setup_time_mean < 0.0 || item.processing_time < 0.0 {
                return Err(Error::Validation(format!("item {}: negative routing time", item.id)));
            }
            if !(item.cost_fgi >= item.cost_wip && item.cost_wip >= 0.0) {
                return Err(Error::Validation(format!(
                    "item {}: require cost_fgi >= cost_wip >= 0",
                    item.id
                )));
            }
            match item.kind {
                ItemKind::EndItem => {
                    if item.cost_backlog < 0.0 {
                        return Err(Error::Validation(format!(
                            "item {}: negative backlog cost",
                            item.id
                        )));
                    }
                }
                _ => {
                    if item.cost_backlog != 0.0 {
                        return Err(Error::Validation(format!(
                            "item {}: backlog cost applies to end items only",
                            item.id
                        )));
                    }
                }
            }
        }

        for e in &bom {
            if !ids.contains(&e.parent) || !ids.contains(&e.child) {
                return Err(Error::Validation(format!(
                    "BOM edge {} -> {} references an unknown item",
                    e.parent, e.child
                )));
            }
            if !(e.quantity_per > 0.0) {
                return Err(Error::Validation(format!(
                    "BOM edge {} -> {}: quantity_per must be positive",
                    e.parent, e.child
                )));
            }
        }
        if bom.windows(2).any(|w| w[0].parent == w[1].parent && w[0].child == w[1].child) {
            return Err(Error::Validation("duplicate BOM edge".into()));
        }

        let llc = compute_llc(&bom, &items)?;

        let mut seen_on: BTreeMap<ItemId, &str> = BTreeMap::new();
        let mut res_ids: BTreeSet<&str> = BTreeSet::new();
        for r in &resources {
            if !res_ids.insert(&r.id) {
                return Err(Error::Validation(format!("duplicate resource id {}", r.id)));
            }
            if !(r.capacity_minutes > 0.0) {
                return Err(Error::Validation(format!(
                    "resource {}: capacity must be positive",
                    r.id
                )));
            }
            let mut levels = BTreeSet::new();
            for &g in &r.items {
                if !ids.contains(&g) {
                    return Err(Error::Validation(format!(
                        "resource {} routes unknown item {g}",
                        r.id
                    )));
                }
                if seen_on.insert(g, &r.id).is_some() {
                    return Err(Error::Validation(format!(
                        "item {g} is routed on more than one resource"
                    )));
                }
                levels.insert(llc[&g]);
            }
            if levels.len() > 1 {
                return Err(Error::Validation(format!(
                    "resource {} mixes items from different BOM levels",
                    r.id
                )));
            }
        }
        for item in &items {
            let routed = seen_on.contains_key(&item.id);
            if item.kind.is_raw() && routed {
                return Err(Error::Validation(format!(
                    "raw material {} must not have a routing",
                    item.id
                )));
            }
            if !item.kind.is_raw() && !routed {
                return Err(Error::Validation(format!(
                    "item {} has no resource routing",
                    item.id
                )));
            }
        }

        Ok(Self { name: name.into(), items, bom, resources, llc })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.items.binary_search_by_key(&id, |i| i.id).ok().map(|ix| &self.items[ix])
    }

    pub fn bom(&self) -> &[BomEdge] {
        &self.bom
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    /// The machine an item is produced on; `None` for raw materials.
    pub fn resource_of(&self, item: ItemId) -> Option<&Resource> {
        self.resources.iter().find(|r| r.items.contains(&item))
    }

    pub fn llc(&self, item: ItemId) -> Option<u32> {
        self.llc.get(&item).copied()
    }

    pub fn max_llc(&self) -> u32 {
        self.llc.values().copied().max().unwrap_or(0)
    }

    /// Items at the given low-level code, sorted by id.
    pub fn items_at_llc(&self, level: u32) -> Vec<&Item> {
        self.items.iter().filter(|i| self.llc[&i.id] == level).collect()
    }

    /// (child, quantity_per) pairs for a parent item.
    pub fn children(&self, parent: ItemId) -> Vec<(ItemId, f64)> {
        self.bom
            .iter()
            .filter(|e| e.parent == parent)
            .map(|e| (e.child, e.quantity_per))
            .collect()
    }

    /// (parent, quantity_per) pairs for a child item.
    pub fn parents(&self, child: ItemId) -> Vec<(ItemId, f64)> {
        self.bom
            .iter()
            .filter(|e| e.child == child)
            .map(|e| (e.parent, e.quantity_per))
            .collect()
    }
}

/// Low-level codes: 0 for items without parents, otherwise one more than the
/// deepest parent. Rejects cyclic BOMs.
pub fn compute_llc(bom: &[BomEdge], items: &[Item]) -> Result<BTreeMap<ItemId, u32>> {
    let mut llc: BTreeMap<ItemId, u32> = items.iter().map(|i| (i.id, 0)).collect();
    // Longest-path relaxation; a BOM with a cycle keeps relaxing past |items|.
    let n = items.len() as u32;
    for round in 0.. {
        let mut changed = false;
        for e in bom {
            let want = llc.get(&e.parent).copied().unwrap_or(0) + 1;
            let cur = llc.entry(e.child).or_insert(0);
            if *cur < want {
                *cur = want;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if round > n {
            return Err(Error::Validation("BOM contains a cycle".into()));
        }
    }
    Ok(llc)
}

/// Propagate end-item demand rates down the BOM: dependent demand of a child
/// is the sum over parents of parent demand × quantity_per.
pub fn propagate_demand(
    system: &ProductionSystem,
    end_demand: &BTreeMap<ItemId, f64>,
) -> BTreeMap<ItemId, f64> {
    let mut demand: BTreeMap<ItemId, f64> = BTreeMap::new();
    for item in system.items() {
        demand.insert(item.id, end_demand.get(&item.id).copied().unwrap_or(0.0));
    }
    // Walk levels top-down so every parent is final before its children.
    for level in 0..=system.max_llc() {
        for item in system.items_at_llc(level) {
            let d = demand[&item.id];
            if d == 0.0 {
                continue;
            }
            for (child, qper) in system.children(item.id) {
                *demand.get_mut(&child).unwrap() += d * qper;
            }
        }
    }
    demand
}

/// Planned utilization per resource for a propagated per-item demand map,
/// assuming one lot per item per period: (Σ demand·p + Σ s) / MC.
pub fn planned_utilization(
    system: &ProductionSystem,
    per_item_demand: &BTreeMap<ItemId, f64>,
) -> BTreeMap<String, f64> {
    let mut util = BTreeMap::new();
    for r in system.resources() {
        let mut minutes = 0.0;
        for &g in &r.items {
            let item = system.item(g).expect("validated routing");
            let d = per_item_demand.get(&g).copied().unwrap_or(0.0);
            minutes += d * item.processing_time;
            if d > 0.0 {
                minutes += item.setup_time_mean;
            }
        }
        util.insert(r.id.clone(), minutes / r.capacity_minutes);
    }
    util
}

/// The per-period end-item demand rate that drives the bottleneck resource to
/// the target utilization (same rate for every end item, one lot per item per
/// period), rounded to two decimals.
pub fn demand_rate_for_utilization(system: &ProductionSystem, target: f64) -> f64 {
    let unit: BTreeMap<ItemId, f64> = system
        .items()
        .iter()
        .filter(|i| i.kind == ItemKind::EndItem)
        .map(|i| (i.id, 1.0))
        .collect();
    let per_unit = propagate_demand(system, &unit);
    let mut x = f64::INFINITY;
    for r in system.resources() {
        let mut p_per_x = 0.0;
        let mut setup = 0.0;
        for &g in &r.items {
            let item = system.item(g).expect("validated routing");
            p_per_x += per_unit[&g] * item.processing_time;
            setup += item.setup_time_mean;
        }
        if p_per_x > 0.0 {
            x = x.min((target * r.capacity_minutes - setup) / p_per_x);
        }
    }
    (x * 100.0).round() / 100.0
}

/// Which processing time to use for item 100 in the first bundled system.
///
/// The system's published description lists 15.1912 minutes, which puts
/// machine M1.1 at 1262 minutes instead of the documented 1296-minute
/// reference load; 15.912 reproduces the reference exactly and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ps1Variant {
    #[default]
    Calibrated,
    Listed,
}

fn end_item(id: ItemId, p: f64, s: f64) -> Item {
    Item {
        id,
        kind: ItemKind::EndItem,
        processing_time: p,
        setup_time_mean: s,
        cost_fgi: 2.0,
        cost_wip: 1.0,
        cost_backlog: 38.0,
    }
}

fn component(id: ItemId, p: f64, s: f64) -> Item {
    Item {
        id,
        kind: ItemKind::Component,
        processing_time: p,
        setup_time_mean: s,
        cost_fgi: 1.0,
        cost_wip: 0.5,
        cost_backlog: 0.0,
    }
}

fn raw(id: ItemId) -> Item {
    Item {
        id,
        kind: ItemKind::RawMaterial,
        processing_time: 0.0,
        setup_time_mean: 0.0,
        cost_fgi: 0.0,
        cost_wip: 0.0,
        cost_backlog: 0.0,
    }
}

fn resource(id: &str, items: &[ItemId]) -> Resource {
    Resource { id: id.into(), capacity_minutes: 1440.0, items: items.to_vec() }
}

/// The small bundled system: four end items on two machines, two components
/// on a shared machine, two always-available raw materials.
pub fn build_ps1() -> ProductionSystem {
    build_ps1_with(Ps1Variant::default())
}

pub fn build_ps1_with(variant: Ps1Variant) -> ProductionSystem {
    let p100 = match variant {
        Ps1Variant::Calibrated => 15.912,
        Ps1Variant::Listed => 15.1912,
    };
    let items = vec![
        end_item(100, p100, 72.0),
        end_item(101, 8.568, 72.0),
        end_item(102, 5.508, 72.0),
        end_item(103, 18.972, 72.0),
        component(200, 4.896, 72.0),
        component(201, 7.344, 72.0),
        raw(300),
        raw(301),
    ];
    let bom = vec![
        BomEdge { parent: 100, child: 200, quantity_per: 1.0 },
        BomEdge { parent: 101, child: 200, quantity_per: 1.0 },
        BomEdge { parent: 102, child: 201, quantity_per: 1.0 },
        BomEdge { parent: 103, child: 201, quantity_per: 1.0 },
        BomEdge { parent: 200, child: 300, quantity_per: 1.0 },
        BomEdge { parent: 201, child: 301, quantity_per: 1.0 },
    ];
    let resources = vec![
        resource("M1.1", &[100, 101]),
        resource("M1.2", &[102, 103]),
        resource("M2.1", &[200, 201]),
    ];
    ProductionSystem::new("ps1", items, bom, resources).expect("ps1 preset is valid")
}

/// The large bundled system: 32 end items over four production stages with
/// four machines per stage; per-lot setup is 144 minutes divided by the number
/// of items on the machine (18/36/72/144 for stages 1-4).
pub fn build_ps2() -> ProductionSystem {
    // (machine, [(item, processing minutes); ...]) per stage.
    let stage1: [(&str, [(ItemId, f64); 8]); 4] = [
        ("M1.1", [(100, 3.366), (104, 3.978), (108, 3.366), (112, 3.978), (116, 2.448), (120, 2.142), (124, 1.836), (128, 3.366)]),
        ("M1.2", [(101, 4.284), (105, 3.366), (109, 2.754), (113, 3.672), (117, 2.448), (121, 3.366), (125, 2.754), (129, 1.836)]),
        ("M1.3", [(102, 2.142), (106, 2.754), (110, 3.978), (114, 1.53), (118, 4.284), (122, 4.59), (126, 2.448), (130, 2.754)]),
        ("M1.4", [(103, 4.284), (107, 1.836), (111, 2.754), (115, 3.672), (119, 2.448), (123, 2.754), (127, 3.672), (131, 3.06)]),
    ];
    let stage2: [(&str, [(ItemId, f64); 4]); 4] = [
        ("M2.1", [(200, 3.06), (204, 2.754), (208, 4.284), (212, 2.142)]),
        ("M2.2", [(201, 1.836), (205, 3.672), (209, 2.142), (213, 4.59)]),
        ("M2.3", [(202, 3.366), (206, 4.284), (210, 1.836), (214, 2.754)]),
        ("M2.4", [(203, 3.06), (207, 3.978), (211, 1.53), (215, 3.672)]),
    ];
    let stage3: [(&str, [(ItemId, f64); 2]); 4] = [
        ("M3.1", [(300, 3.978), (304, 2.142)]),
        ("M3.2", [(301, 4.284), (305, 1.836)]),
        ("M3.3", [(302, 4.59), (306, 1.53)]),
        ("M3.4", [(303, 3.672), (307, 2.448)]),
    ];
    let stage4: [(&str, [(ItemId, f64); 1]); 4] = [
        ("M4.1", [(400, 3.06)]),
        ("M4.2", [(401, 3.06)]),
        ("M4.3", [(402, 3.06)]),
        ("M4.4", [(403, 3.06)]),
    ];

    let mut items = Vec::new();
    let mut resources = Vec::new();
    for (rid, routed) in stage1 {
        for (g, p) in routed {
            items.push(end_item(g, p, 18.0));
        }
        resources.push(resource(rid, &routed.map(|(g, _)| g)));
    }
    for (rid, routed) in stage2 {
        for (g, p) in routed {
            items.push(component(g, p, 36.0));
        }
        resources.push(resource(rid, &routed.map(|(g, _)| g)));
    }
    for (rid, routed) in stage3 {
        for (g, p) in routed {
            items.push(component(g, p, 72.0));
        }
        resources.push(resource(rid, &routed.map(|(g, _)| g)));
    }
    for (rid, routed) in stage4 {
        for (g, p) in routed {
            items.push(component(g, p, 144.0));
        }
        resources.push(resource(rid, &routed.map(|(g, _)| g)));
    }
    items.push(raw(500));

    let mut bom = Vec::new();
    for j in 0..32u32 {
        bom.push(BomEdge { parent: 100 + j, child: 200 + j / 2, quantity_per: 1.0 });
    }
    for j in 0..16u32 {
        bom.push(BomEdge { parent: 200 + j, child: 300 + j / 2, quantity_per: 1.0 });
    }
    for j in 0..8u32 {
        bom.push(BomEdge { parent: 300 + j, child: 400 + j / 2, quantity_per: 1.0 });
    }
    for j in 0..4u32 {
        bom.push(BomEdge { parent: 400 + j, child: 500, quantity_per: 1.0 });
    }

    ProductionSystem::new("ps2", items, bom, resources).expect("ps2 preset is valid")
}

/// Look up a bundled system by name.
pub fn preset(name: &str) -> Option<ProductionSystem> {
    match name {
        "ps1" => Some(build_ps1()),
        "ps1-listed" => Some(build_ps1_with(Ps1Variant::Listed)),
        "ps2" => Some(build_ps2()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_end_demand(system: &ProductionSystem, x: f64) -> BTreeMap<ItemId, f64> {
        let ends: BTreeMap<ItemId, f64> = system
            .items()
            .iter()
            .filter(|i| i.kind == ItemKind::EndItem)
            .map(|i| (i.id, x))
            .collect();
        propagate_demand(system, &ends)
    }

    #[test]
    fn llc_levels_for_ps1() {
        let s = build_ps1();
        assert_eq!(s.llc(100), Some(0));
        assert_eq!(s.llc(200), Some(1));
        assert_eq!(s.llc(300), Some(2));
        assert_eq!(s.llc(201), Some(1));
        assert_eq!(s.max_llc(), 2);
    }

    #[test]
    fn llc_single_item_no_bom() {
        let items = vec![end_item(1, 1.0, 0.0)];
        let llc = compute_llc(&[], &items).unwrap();
        assert_eq!(llc[&1], 0);
    }

    #[test]
    fn llc_diamond_takes_longest_path() {
        // A -> B, A -> C, B -> D, C -> D, plus a direct A -> D shortcut:
        // the deepest chain wins.
        let items =
            vec![end_item(1, 1.0, 0.0), component(2, 1.0, 0.0), component(3, 1.0, 0.0), component(4, 1.0, 0.0)];
        let bom = vec![
            BomEdge { parent: 1, child: 2, quantity_per: 1.0 },
            BomEdge { parent: 1, child: 3, quantity_per: 1.0 },
            BomEdge { parent: 2, child: 4, quantity_per: 1.0 },
            BomEdge { parent: 3, child: 4, quantity_per: 1.0 },
            BomEdge { parent: 1, child: 4, quantity_per: 1.0 },
        ];
        let llc = compute_llc(&bom, &items).unwrap();
        assert_eq!(llc[&4], 2);
        assert_eq!(llc[&2], 1);
        assert_eq!(llc[&1], 0);
    }

    #[test]
    fn llc_rejects_cycles() {
        let items = vec![component(1, 1.0, 0.0), component(2, 1.0, 0.0)];
        let bom = vec![
            BomEdge { parent: 1, child: 2, quantity_per: 1.0 },
            BomEdge { parent: 2, child: 1, quantity_per: 1.0 },
        ];
        assert!(compute_llc(&bom, &items).is_err());
    }

    #[test]
    fn llc_is_order_independent() {
        let s = build_ps2();
        let mut reversed: Vec<BomEdge> = s.bom().to_vec();
        reversed.reverse();
        let a = compute_llc(s.bom(), s.items()).unwrap();
        let b = compute_llc(&reversed, s.items()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ps1_structure() {
        let s = build_ps1();
        assert_eq!(s.items().len(), 8);
        assert_eq!(s.resources().len(), 3);
        let i103 = s.item(103).unwrap();
        assert_eq!(i103.processing_time, 18.972);
        assert_eq!(s.resource_of(103).unwrap().id, "M1.2");
        assert_eq!(s.item(200).unwrap().setup_time_mean, 72.0);
        assert_eq!(s.item(100).unwrap().processing_time, 15.912);
        let listed = build_ps1_with(Ps1Variant::Listed);
        assert_eq!(listed.item(100).unwrap().processing_time, 15.1912);
    }

    #[test]
    fn ps2_structure() {
        let s = build_ps2();
        assert_eq!(s.items().len(), 32 + 16 + 8 + 4 + 1);
        assert_eq!(s.resources().len(), 16);
        // item 300 feeds items 200 and 201
        let parents: Vec<ItemId> = s.parents(300).iter().map(|(p, _)| *p).collect();
        assert_eq!(parents, vec![200, 201]);
        let m31 = s.resource("M3.1").unwrap();
        assert_eq!(m31.items, vec![300, 304]);
        assert_eq!(s.item(400).unwrap().setup_time_mean, 144.0);
        assert_eq!(s.item(100).unwrap().setup_time_mean, 18.0);
        assert_eq!(s.llc(500), Some(4));
        // PS2 BOM quotient rule
        let children: Vec<ItemId> = s.children(100).iter().map(|(c, _)| *c).collect();
        assert_eq!(children, vec![200]);
        let children: Vec<ItemId> = s.children(215).iter().map(|(c, _)| *c).collect();
        assert_eq!(children, vec![307]);
    }

    #[test]
    fn ps1_utilization_calibration() {
        let s = build_ps1();
        for (x, target) in [(41.18, 0.80), (44.12, 0.85), (47.06, 0.90)] {
            let util = planned_utilization(&s, &uniform_end_demand(&s, x));
            for m in ["M1.1", "M1.2", "M2.1"] {
                assert!(
                    (util[m] - target).abs() <= 0.005,
                    "{m} at x={x}: {} vs {target}",
                    util[m]
                );
            }
        }
        // The reference load: (5.508 + 18.972)·47.06 + 2·72 = 1296.03 minutes.
        let util = planned_utilization(&s, &uniform_end_demand(&s, 47.06));
        assert!((util["M1.2"] * 1440.0 - 1296.03).abs() < 0.02);
        assert!((util["M2.1"] * 1440.0 - 1296.0).abs() < 0.05);
    }

    #[test]
    fn ps2_utilization_calibration() {
        let s = build_ps2();
        let util = planned_utilization(&s, &uniform_end_demand(&s, 47.06));
        for (m, u) in &util {
            assert!((u - 0.90).abs() <= 0.005, "{m}: {u}");
        }
    }

    #[test]
    fn zero_demand_means_zero_utilization() {
        let s = build_ps1();
        let util = planned_utilization(&s, &uniform_end_demand(&s, 0.0));
        assert!(util.values().all(|&u| u == 0.0));
    }

    #[test]
    fn demand_rate_reproduces_published_levels() {
        let s = build_ps1();
        assert_eq!(demand_rate_for_utilization(&s, 0.80), 41.18);
        assert_eq!(demand_rate_for_utilization(&s, 0.85), 44.12);
        assert_eq!(demand_rate_for_utilization(&s, 0.90), 47.06);
        let s2 = build_ps2();
        assert_eq!(demand_rate_for_utilization(&s2, 0.90), 47.06);
    }

    #[test]
    fn propagation_sums_over_parents() {
        let s = build_ps1();
        let dem = uniform_end_demand(&s, 47.06);
        assert!((dem[&200] - 94.12).abs() < 1e-9);
        assert!((dem[&201] - 94.12).abs() < 1e-9);
        assert!((dem[&300] - 94.12).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_dangling_and_misrouted() {
        // Dangling BOM child.
        let items = vec![end_item(1, 1.0, 0.0)];
        let bom = vec![BomEdge { parent: 1, child: 99, quantity_per: 1.0 }];
        assert!(ProductionSystem::new("x", items.clone(), bom, vec![resource("M", &[1])]).is_err());

        // Item on two resources.
        let err = ProductionSystem::new(
            "x",
            items.clone(),
            vec![],
            vec![resource("A", &[1]), resource("B", &[1])],
        );
        assert!(err.is_err());

        // Non-raw item without routing.
        assert!(ProductionSystem::new("x", items.clone(), vec![], vec![]).is_err());

        // Resource mixing BOM levels.
        let items2 = vec![end_item(1, 1.0, 0.0), component(2, 1.0, 0.0)];
        let bom2 = vec![BomEdge { parent: 1, child: 2, quantity_per: 1.0 }];
        assert!(ProductionSystem::new("x", items2, bom2, vec![resource("M", &[1, 2])]).is_err());

        // Component with a backlog cost.
        let mut bad = component(2, 1.0, 0.0);
        bad.cost_backlog = 5.0;
        assert!(ProductionSystem::new("x", vec![bad], vec![], vec![resource("M", &[2])]).is_err());
    }
}
