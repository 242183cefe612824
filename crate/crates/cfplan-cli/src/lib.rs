//! Experiment harness around the planning laboratory: TOML experiment plans,
//! grid execution with common random numbers, CSV results with a
//! reproducibility manifest, and minimum-cost report tables.
//!
//! - [`plan`]: the plan file schema, validation, and scenario expansion.
//! - [`grid`]: running a scenario × replication matrix into flat result rows,
//!   plus the manifest that makes any row replayable.
//! - [`report`]: per-scenario aggregation and best-parameter selection.

pub mod grid;
pub mod plan;
pub mod report;

pub use grid::{replay_row, run_grid, Manifest, ScenarioRow};
pub use plan::{expand, parse_plan, parse_plan_str, ExperimentPlan, Scenario};
pub use report::{aggregate, select_min_cost, BestRow, ScenarioAggregate};
