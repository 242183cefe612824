//! Production planning laboratory: multi-stage make-to-stock systems planned
//! with classic MRP or with clearing-function release optimization, evaluated
//! by discrete-event simulation under evolving demand forecasts.
//!
//! The crate is organized along the planning pipeline:
//!
//! - [`system`]: items, BOM, resources, routing, and the two bundled
//!   production systems (PS1, PS2).
//! - [`format`]: the plain-text system-definition file format.
//! - [`demand`]: additive martingale forecast evolution and demand traces.
//! - [`cf`]: piecewise-linear concave clearing functions.
//! - [`mrp`]: netting, fixed-order-period lot sizing, backward scheduling and
//!   BOM explosion, with backward scheduling replaceable by the optimizer.
//! - [`opt`]: the release-date MIP, its branch-and-bound solver, a brute-force
//!   oracle, and certificate verification.
//! - [`shopfloor`]: the discrete-event machine simulation.
//! - [`rolling`]: the per-period coordination loop, cost accounting and KPIs.

pub mod cf;
pub mod demand;
pub mod format;
pub mod mrp;
pub mod opt;
pub mod rolling;
pub mod seeds;
pub mod shopfloor;
pub mod stats;
pub mod system;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A definition file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A constructed object violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The optimizer could not produce a certified plan.
    #[error("solver error: {0}")]
    Solver(String),

    /// Demand data was queried outside its defined range.
    #[error("demand error: {0}")]
    Demand(String),

    /// A simulation-level inconsistency (conservation violation etc.).
    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
