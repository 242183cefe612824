//! Additive martingale forecast evolution for end-item demand.
//!
//! Each (item, due period) pair starts at the long-term rate `x_g` and
//! receives at most two zero-mean normal shocks: one when the due date comes
//! within the forecast horizon H (magnitude α·x_g) and, optionally, one more
//! in the period just before the due date (magnitude β·x_g). When the due
//! period arrives the forecast freezes into the realized order amount.
//! Shocks are clipped from below so forecasts never go negative.
//!
//! Every (item, due) pair draws from its own RNG substream, so demand is
//! identical across planning configurations that share a replication seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::seeds::{substream, TAG_DEMAND};
use crate::system::ItemId;
use crate::{Error, Result};

/// Parameters of the forecast generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandParams {
    /// Long-term forecast per end item (units per period).
    pub rates: BTreeMap<ItemId, f64>,
    /// Forecast horizon H in periods.
    pub horizon: u32,
    /// Relative shock magnitude when a due date enters the horizon.
    pub alpha: f64,
    /// Relative shock magnitude one period before the due date (0 = one-update).
    pub beta: f64,
}

impl DemandParams {
    pub fn uniform(items: impl IntoIterator<Item = ItemId>, x: f64, horizon: u32) -> Self {
        Self {
            rates: items.into_iter().map(|g| (g, x)).collect(),
            horizon,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Validation("forecast horizon must be at least 1".into()));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Validation("shock magnitudes must be nonnegative".into()));
        }
        if self.rates.is_empty() {
            return Err(Error::Validation("demand requires at least one end item".into()));
        }
        for (&g, &x) in &self.rates {
            if !(x > 0.0) {
                return Err(Error::Validation(format!(
                    "item {g}: long-term forecast must be positive, got {x}"
                )));
            }
        }
        Ok(())
    }
}

/// The evolving forecast state.
///
/// `now` is the last period whose demand has been realized (0 before the
/// first advance). Open forecasts cover due periods `now+1 ..= now+H`; dues
/// beyond the horizon implicitly carry `x_g`.
#[derive(Debug, Clone)]
pub struct ForecastSet {
    params: DemandParams,
    seed: u64,
    now: u32,
    open: BTreeMap<(ItemId, u32), f64>,
    realized: BTreeMap<(ItemId, u32), f64>,
}

/// Shock draws for one (item, due) pair. The first draw is the horizon-entry
/// shock, the second the late shock; the order is fixed so that replaying a
/// substream is position-stable.
fn shocks(seed: u64, g: ItemId, due: u32, alpha: f64, beta: f64, x: f64) -> (f64, f64) {
    let mut rng = substream(seed, TAG_DEMAND, u64::from(g), u64::from(due));
    let a = if alpha > 0.0 { alpha * x * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
    let b = if beta > 0.0 { beta * x * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
    (a, b)
}

fn clip_add(value: f64, shock: f64) -> f64 {
    (value + shock).max(0.0)
}

impl ForecastSet {
    /// Initialize at period 0 with open dues `1 ..= min(H, horizon_length)`.
    ///
    /// Dues already inside the horizon at start get the shocks they would
    /// have received had the process been running forever (their substreams
    /// are replayed), so the first periods are statistically identical to
    /// steady state. `horizon_length` only matters for toy setups that want
    /// fewer open dues than H.
    pub fn init(params: DemandParams, horizon_length: u32, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut open = BTreeMap::new();
        let h = params.horizon;
        for (&g, &x) in &params.rates {
            for due in 1..=h.min(horizon_length) {
                // At now = 0, a due ≤ H entered the horizon in the past, so its
                // horizon-entry shock already happened. The late shock has
                // happened only for due 1 (it fires at due − 1 = 0).
                let (a, b) = shocks(seed, g, due, params.alpha, params.beta, x);
                let mut v = clip_add(x, a);
                if due == 1 {
                    v = clip_add(v, b);
                }
                open.insert((g, due), v);
            }
        }
        Ok(Self { params, seed, now: 0, open, realized: BTreeMap::new() })
    }

    pub fn now(&self) -> u32 {
        self.now
    }

    pub fn params(&self) -> &DemandParams {
        &self.params
    }

    /// Advance one period: realize the next due, pull a new due into the
    /// horizon with its entry shock, and apply late shocks at γ = 1.
    pub fn advance_one_period(&mut self) {
        let h = self.params.horizon;
        self.now += 1;
        let now = self.now;
        let items: Vec<(ItemId, f64)> =
            self.params.rates.iter().map(|(&g, &x)| (g, x)).collect();
        for (g, x) in items {
            // Freeze the due that has arrived.
            let frozen = self.open.remove(&(g, now)).unwrap_or(x);
            self.realized.insert((g, now), frozen);

            // A new due enters the horizon with its entry shock.
            let entering = now + h;
            let (a, _) = shocks(self.seed, g, entering, self.params.alpha, self.params.beta, x);
            self.open.insert((g, entering), clip_add(x, a));

            // Late shock one period ahead of its due date.
            if self.params.beta > 0.0 {
                let due = now + 1;
                let (_, b) = shocks(self.seed, g, due, self.params.alpha, self.params.beta, x);
                if let Some(v) = self.open.get_mut(&(g, due)) {
                    *v = clip_add(*v, b);
                }
            }
        }
    }

    /// Current forecast for (item, due). Realized dues return their frozen
    /// value; dues beyond the horizon return the long-term rate.
    pub fn forecast(&self, g: ItemId, due: u32) -> f64 {
        if due <= self.now {
            return self.realized.get(&(g, due)).copied().unwrap_or_else(|| self.rate(g));
        }
        if let Some(v) = self.open.get(&(g, due)) {
            return *v;
        }
        self.rate(g)
    }

    /// The frozen order amount for a realized due period.
    pub fn realized_demand(&self, g: ItemId, due: u32) -> Result<f64> {
        if due > self.now {
            return Err(Error::Demand(format!(
                "demand for item {g} due {due} queried before realization (now = {})",
                self.now
            )));
        }
        self.realized
            .get(&(g, due))
            .copied()
            .ok_or_else(|| Error::Demand(format!("no demand recorded for item {g} due {due}")))
    }

    fn rate(&self, g: ItemId) -> f64 {
        self.params.rates.get(&g).copied().unwrap_or(0.0)
    }

    /// Append the current forecast window (and the just-realized due) to a
    /// demand trace: one row per (period, item, due, γ, value).
    pub fn trace_rows(&self, out: &mut Vec<TraceRow>) {
        for (&g, _) in &self.params.rates {
            if self.now > 0 {
                if let Ok(v) = self.realized_demand(g, self.now) {
                    out.push(TraceRow { period: self.now, item: g, due: self.now, gamma: 0, value: v });
                }
            }
            for due in self.now + 1..=self.now + self.params.horizon {
                out.push(TraceRow {
                    period: self.now,
                    item: g,
                    due,
                    gamma: due - self.now,
                    value: self.forecast(g, due),
                });
            }
        }
    }
}

/// One row of a demand trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub period: u32,
    pub item: ItemId,
    pub due: u32,
    pub gamma: u32,
    pub value: f64,
}

/// Render trace rows as delimited text (header + one row per line).
pub fn write_trace(rows: &[TraceRow]) -> String {
    let mut out = String::from("period,item,due,gamma,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.period, r.item, r.due, r.gamma, r.value);
    }
    out
}

/// Parse a demand trace produced by [`write_trace`].
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse { line: idx + 1, message: "expected 5 fields".into() });
        }
        let num = |i: usize| -> Result<u32> {
            fields[i]
                .parse()
                .map_err(|_| Error::Parse { line: idx + 1, message: format!("bad field {i}") })
        };
        rows.push(TraceRow {
            period: num(0)?,
            item: num(1)?,
            due: num(2)?,
            gamma: num(3)?,
            value: fields[4]
                .parse()
                .map_err(|_| Error::Parse { line: idx + 1, message: "bad value".into() })?,
        });
    }
    Ok(rows)
}

/// Replays a recorded demand trace in place of the generator, so external
/// tools can inject demand scenarios.
#[derive(Debug, Clone)]
pub struct TracePlayer {
    by_period: BTreeMap<u32, BTreeMap<(ItemId, u32), f64>>,
    realized: BTreeMap<(ItemId, u32), f64>,
    horizon: u32,
    now: u32,
}

impl TracePlayer {
    pub fn new(rows: Vec<TraceRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Demand("empty demand trace".into()));
        }
        let horizon = rows.iter().map(|r| r.gamma).max().unwrap();
        let mut by_period: BTreeMap<u32, BTreeMap<(ItemId, u32), f64>> = BTreeMap::new();
        for r in rows {
            by_period.entry(r.period).or_default().insert((r.item, r.due), r.value);
        }
        Ok(Self { by_period, realized: BTreeMap::new(), horizon, now: 0 })
    }

    pub fn now(&self) -> u32 {
        self.now
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn advance_one_period(&mut self) -> Result<()> {
        self.now += 1;
        let frame = self
            .by_period
            .get(&self.now)
            .ok_or_else(|| Error::Demand(format!("trace has no frame for period {}", self.now)))?;
        for (&(g, due), &v) in frame {
            if due == self.now {
                self.realized.insert((g, due), v);
            }
        }
        Ok(())
    }

    pub fn forecast(&self, g: ItemId, due: u32) -> f64 {
        if due <= self.now {
            return self.realized.get(&(g, due)).copied().unwrap_or(0.0);
        }
        self.by_period
            .get(&self.now)
            .and_then(|frame| frame.get(&(g, due)).copied())
            .unwrap_or_else(|| {
                // Beyond the recorded window: fall back to the most recent
                // value recorded for this due, if any.
                self.by_period
                    .values()
                    .rev()
                    .find_map(|f| f.get(&(g, due)).copied())
                    .unwrap_or(0.0)
            })
    }

    pub fn realized_demand(&self, g: ItemId, due: u32) -> Result<f64> {
        self.realized
            .get(&(g, due))
            .copied()
            .ok_or_else(|| Error::Demand(format!("trace demand for item {g} due {due} not realized")))
    }
}

/// Either live MMFE generation or trace replay; the rolling driver is
/// agnostic to which.
#[derive(Debug, Clone)]
pub enum ForecastProvider {
    Mmfe(ForecastSet),
    Trace(TracePlayer),
}

impl ForecastProvider {
    pub fn now(&self) -> u32 {
        match self {
            ForecastProvider::Mmfe(f) => f.now(),
            ForecastProvider::Trace(t) => t.now(),
        }
    }

    pub fn advance_one_period(&mut self) -> Result<()> {
        match self {
            ForecastProvider::Mmfe(f) => {
                f.advance_one_period();
                Ok(())
            }
            ForecastProvider::Trace(t) => t.advance_one_period(),
        }
    }

    pub fn forecast(&self, g: ItemId, due: u32) -> f64 {
        match self {
            ForecastProvider::Mmfe(f) => f.forecast(g, due),
            ForecastProvider::Trace(t) => t.forecast(g, due),
        }
    }

    pub fn realized_demand(&self, g: ItemId, due: u32) -> Result<f64> {
        match self {
            ForecastProvider::Mmfe(f) => f.realized_demand(g, due),
            ForecastProvider::Trace(t) => t.realized_demand(g, due),
        }
    }
}
