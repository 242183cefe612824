//! Plain-text system-definition files.
//!
//! A system file has four sections; blank lines and `#` comments are ignored:
//!
//! ```text
//! [system]
//! name ps1
//!
//! [items]
//! # id  kind(end|component|raw)  fgi_cost  wip_cost  backlog_cost
//! 100 end 2 1 38
//!
//! [bom]
//! # parent  child  quantity_per
//! 100 200 1
//!
//! [resources]
//! # id  capacity_minutes
//! M1.1 1440
//!
//! [routing]
//! # item  resource  processing_min_per_unit  setup_min_per_lot
//! 100 M1.1 15.912 72
//! ```
//!
//! Raw materials take no `[routing]` line. Parsing validates the assembled
//! system with the same checks as programmatic construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::system::{BomEdge, Item, ItemId, ItemKind, ProductionSystem, Resource};
use crate::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what}: {tok:?}")))
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    System,
    Items,
    Bom,
    Resources,
    Routing,
}

/// Parse a system-definition document.
pub fn parse_system(text: &str) -> Result<ProductionSystem> {
    struct ItemLine {
        kind: ItemKind,
        fgi: f64,
        wip: f64,
        backlog: f64,
    }
    let mut name = String::from("unnamed");
    let mut items: BTreeMap<ItemId, ItemLine> = BTreeMap::new();
    let mut bom: Vec<BomEdge> = Vec::new();
    let mut capacities: BTreeMap<String, f64> = BTreeMap::new();
    let mut routing: BTreeMap<ItemId, (String, f64, f64)> = BTreeMap::new();
    let mut item_order: Vec<ItemId> = Vec::new();

    let mut section = Section::None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            section = match header {
                "system" => Section::System,
                "items" => Section::Items,
                "bom" => Section::Bom,
                "resources" => Section::Resources,
                "routing" => Section::Routing,
                other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::None => {
                return Err(parse_err(line_no, "content before the first section header"))
            }
            Section::System => {
                if toks.len() == 2 && toks[0] == "name" {
                    name = toks[1].to_string();
                } else {
                    return Err(parse_err(line_no, "expected: name <identifier>"));
                }
            }
            Section::Items => {
                if toks.len() != 5 {
                    return Err(parse_err(line_no, "expected: id kind fgi wip backlog"));
                }
                let id: ItemId = parse_num(toks[0], line_no, "item id")?;
                let kind = match toks[1] {
                    "end" | "end-item" => ItemKind::EndItem,
                    "component" => ItemKind::Component,
                    "raw" | "raw-material" => ItemKind::RawMaterial,
                    other => return Err(parse_err(line_no, format!("unknown item kind {other:?}"))),
                };
                let fgi = parse_num(toks[2], line_no, "fgi cost")?;
                let wip = parse_num(toks[3], line_no, "wip cost")?;
                let backlog = parse_num(toks[4], line_no, "backlog cost")?;
                if items.insert(id, ItemLine { kind, fgi, wip, backlog }).is_some() {
                    return Err(parse_err(line_no, format!("duplicate item {id}")));
                }
                item_order.push(id);
            }
            Section::Bom => {
                if toks.len() != 3 {
                    return Err(parse_err(line_no, "expected: parent child quantity_per"));
                }
                bom.push(BomEdge {
                    parent: parse_num(toks[0], line_no, "parent id")?,
                    child: parse_num(toks[1], line_no, "child id")?,
                    quantity_per: parse_num(toks[2], line_no, "quantity_per")?,
                });
            }
            Section::Resources => {
                if toks.len() != 2 {
                    return Err(parse_err(line_no, "expected: id capacity_minutes"));
                }
                let cap: f64 = parse_num(toks[1], line_no, "capacity")?;
                if capacities.insert(toks[0].to_string(), cap).is_some() {
                    return Err(parse_err(line_no, format!("duplicate resource {}", toks[0])));
                }
            }
            Section::Routing => {
                if toks.len() != 4 {
                    return Err(parse_err(line_no, "expected: item resource processing setup"));
                }
                let id: ItemId = parse_num(toks[0], line_no, "item id")?;
                let p: f64 = parse_num(toks[2], line_no, "processing time")?;
                let s: f64 = parse_num(toks[3], line_no, "setup time")?;
                if routing.insert(id, (toks[1].to_string(), p, s)).is_some() {
                    return Err(parse_err(line_no, format!("duplicate routing for item {id}")));
                }
            }
        }
    }

    let mut out_items = Vec::new();
    for id in item_order {
        let spec = &items[&id];
        let (p, s) = routing.get(&id).map(|(_, p, s)| (*p, *s)).unwrap_or((0.0, 0.0));
        out_items.push(Item {
            id,
            kind: spec.kind,
            processing_time: p,
            setup_time_mean: s,
            cost_fgi: spec.fgi,
            cost_wip: spec.wip,
            cost_backlog: spec.backlog,
        });
    }
    let mut resources: Vec<Resource> = capacities
        .iter()
        .map(|(rid, &cap)| Resource { id: rid.clone(), capacity_minutes: cap, items: Vec::new() })
        .collect();
    for (&item, (rid, _, _)) in &routing {
        match resources.iter_mut().find(|r| &r.id == rid) {
            Some(r) => r.items.push(item),
            None => {
                return Err(Error::Validation(format!(
                    "routing for item {item} references unknown resource {rid}"
                )))
            }
        }
    }
    ProductionSystem::new(name, out_items, bom, resources)
}

/// Serialize a system to the definition format. Deterministic: sections are
/// emitted in fixed order with entries sorted the same way the system stores
/// them.
pub fn write_system(system: &ProductionSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[system]");
    let _ = writeln!(out, "name {}", system.name());
    let _ = writeln!(out);
    let _ = writeln!(out, "[items]");
    let _ = writeln!(out, "# id kind fgi_cost wip_cost backlog_cost");
    for item in system.items() {
        let kind = match item.kind {
            ItemKind::EndItem => "end",
            ItemKind::Component => "component",
            ItemKind::RawMaterial => "raw",
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            item.id, kind, item.cost_fgi, item.cost_wip, item.cost_backlog
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[bom]");
    let _ = writeln!(out, "# parent child quantity_per");
    for e in system.bom() {
        let _ = writeln!(out, "{} {} {}", e.parent, e.child, e.quantity_per);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[resources]");
    let _ = writeln!(out, "# id capacity_minutes");
    for r in system.resources() {
        let _ = writeln!(out, "{} {}", r.id, r.capacity_minutes);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[routing]");
    let _ = writeln!(out, "# item resource processing_min setup_min");
    for r in system.resources() {
        for &g in &r.items {
            let item = system.item(g).expect("validated");
            let _ = writeln!(
                out,
                "{} {} {} {}",
                g, r.id, item.processing_time, item.setup_time_mean
            );
        }
    }
    out
}
