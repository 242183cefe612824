//! Text serialization of model instances, for regression fixtures and bug
//! reports. The format is sectioned key/value text; floats use the shortest
//! round-trip decimal form, so load(dump(x)) reproduces x exactly.

use std::fmt::Write as _;

use super::{ItemData, OrderSpec, ReleaseModelInstance};
use crate::cf::{ClearingFunction, Segment};
use crate::{Error, Result};

pub fn dump_instance(instance: &ReleaseModelInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[release-instance]");
    let _ = writeln!(out, "start {}", instance.start_period());
    let _ = writeln!(out, "horizon {}", instance.horizon());
    let _ = writeln!(out, "max-lead {}", instance.max_lead());
    let _ = writeln!(out, "release-until-due {}", instance.release_until_due());
    let _ = writeln!(out, "\n[clearing-function]");
    let _ = writeln!(out, "capacity {}", instance.capacity());
    for seg in instance.cf().segments() {
        let _ = writeln!(out, "segment {} {}", seg.slope, seg.intercept);
    }
    let _ = writeln!(out, "\n[items]");
    let _ = writeln!(out, "# id processing setup cost_fgi cost_wip cost_backlog init_fgi init_backlog init_wip");
    for item in instance.items() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            item.id,
            item.processing_time,
            item.setup_time,
            item.cost_fgi,
            item.cost_wip,
            item.cost_backlog,
            item.initial_fgi,
            item.initial_backlog,
            item.initial_wip
        );
    }
    let _ = writeln!(out, "\n[demand]");
    let _ = writeln!(out, "# item, then one value per grid period");
    for item in instance.items() {
        let _ = write!(out, "{}", item.id);
        for v in &item.demand {
            let _ = write!(out, " {v}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "\n[orders]");
    let _ = writeln!(out, "# id item quantity due");
    for o in instance.orders() {
        let _ = writeln!(out, "{} {} {} {}", o.id, o.item, o.quantity, o.due);
    }
    out
}

pub fn parse_instance(text: &str) -> Result<ReleaseModelInstance> {
    let mut section = String::new();
    let mut start: Option<u32> = None;
    let mut horizon: Option<usize> = None;
    let mut max_lead: Option<u32> = None;
    let mut release_until_due = false;
    let mut capacity: Option<f64> = None;
    let mut segments: Vec<Segment> = Vec::new();
    let mut items: Vec<ItemData> = Vec::new();
    let mut orders: Vec<OrderSpec> = Vec::new();

    let fail = |line: usize, message: &str| Error::Parse { line, message: message.into() };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.to_string();
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| fail(lineno, &format!("bad number '{s}'")))
        };
        match section.as_str() {
            "release-instance" => {
                if fields.len() != 2 {
                    return Err(fail(lineno, "expected 'key value'"));
                }
                match fields[0] {
                    "start" => start = Some(num(fields[1])? as u32),
                    "horizon" => horizon = Some(num(fields[1])? as usize),
                    "max-lead" => max_lead = Some(num(fields[1])? as u32),
                    "release-until-due" => {
                        release_until_due = fields[1]
                            .parse()
                            .map_err(|_| fail(lineno, "expected true or false"))?
                    }
                    other => return Err(fail(lineno, &format!("unknown key '{other}'"))),
                }
            }
            "clearing-function" => match fields[0] {
                "capacity" if fields.len() == 2 => capacity = Some(num(fields[1])?),
                "segment" if fields.len() == 3 => segments.push(Segment {
                    slope: num(fields[1])?,
                    intercept: num(fields[2])?,
                }),
                _ => return Err(fail(lineno, "expected 'capacity v' or 'segment slope intercept'")),
            },
            "items" => {
                if fields.len() != 9 {
                    return Err(fail(lineno, "expected 9 item fields"));
                }
                items.push(ItemData {
                    id: num(fields[0])? as u32,
                    processing_time: num(fields[1])?,
                    setup_time: num(fields[2])?,
                    cost_fgi: num(fields[3])?,
                    cost_wip: num(fields[4])?,
                    cost_backlog: num(fields[5])?,
                    initial_fgi: num(fields[6])?,
                    initial_backlog: num(fields[7])?,
                    initial_wip: num(fields[8])?,
                    demand: Vec::new(),
                });
            }
            "demand" => {
                let id = num(fields[0])? as u32;
                let item = items
                    .iter_mut()
                    .find(|i| i.id == id)
                    .ok_or_else(|| fail(lineno, &format!("demand for unknown item {id}")))?;
                item.demand = fields[1..].iter().map(|s| num(s)).collect::<Result<_>>()?;
            }
            "orders" => {
                if fields.len() != 4 {
                    return Err(fail(lineno, "expected 'id item quantity due'"));
                }
                orders.push(OrderSpec {
                    id: num(fields[0])? as u64,
                    item: num(fields[1])? as u32,
                    quantity: num(fields[2])?,
                    due: num(fields[3])? as u32,
                });
            }
            "" => return Err(fail(lineno, "content before any section header")),
            other => return Err(fail(lineno, &format!("unknown section '{other}'"))),
        }
    }

    let start = start.ok_or_else(|| fail(0, "missing 'start'"))?;
    let horizon = horizon.ok_or_else(|| fail(0, "missing 'horizon'"))?;
    let max_lead = max_lead.ok_or_else(|| fail(0, "missing 'max-lead'"))?;
    let capacity = capacity.ok_or_else(|| fail(0, "missing clearing-function capacity"))?;
    let cf = ClearingFunction::from_segments(segments, capacity)?;
    ReleaseModelInstance::new(start, horizon, items, orders, max_lead, release_until_due, cf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReleaseModelInstance {
        let cf = ClearingFunction::three_segment(1440.0, 0.6).unwrap();
        ReleaseModelInstance::new(
            3,
            6,
            vec![ItemData {
                id: 200,
                processing_time: 7.56,
                setup_time: 72.0,
                cost_fgi: 1.0,
                cost_wip: 0.5,
                cost_backlog: 38.0,
                initial_fgi: 10.25,
                initial_backlog: 0.0,
                initial_wip: 5.5,
                demand: vec![40.0, 40.5, 41.0, 0.0, 39.0, 40.0],
            }],
            vec![
                OrderSpec { id: 1, item: 200, quantity: 40.5, due: 4 },
                OrderSpec { id: 2, item: 200, quantity: 41.0, due: 5 },
            ],
            4,
            true,
            cf,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let instance = sample();
        let text = dump_instance(&instance);
        let parsed = parse_instance(&text).unwrap();
        assert_eq!(parsed, instance);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = dump_instance(&sample());
        let broken = text.replace("segment 1 0", "segment one 0");
        match parse_instance(&broken) {
            Err(Error::Parse { line, .. }) => assert!(line > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_fields_rejected() {
        assert!(parse_instance("[release-instance]\nstart 1\n").is_err());
    }
}
