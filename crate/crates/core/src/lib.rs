//! Solver library for the reliability-constrained k-rooted minimum spanning
//! forest: connect demand vertices to supply vertices by a minimum-cost
//! forest whose root paths all satisfy a reliability (or delay) budget.
//!
//! The pieces, bottom up:
//!
//! - [`instance`] / [`forest`]: domain types, path evaluation, feasibility
//!   checking and the two elementary insertion moves.
//! - [`instances`]: random instance families and the text file formats.
//! - [`construct`]: feasible initial solutions.
//! - [`neighborhoods`] / [`shaking`]: improving and diversifying operators.
//! - [`engine`]: the adaptive large neighborhood search driver.
//! - [`exact`]: desk-scale oracles (exhaustive optimum, contracted-MST
//!   bound) and MPS export of the flow MILP.
//! - [`tuner`]: genetic parameter tuning for the engine.

pub mod construct;
pub mod engine;
pub mod exact;
pub mod forest;
pub mod instance;
pub mod instances;
pub mod matrix;
mod mst;
pub mod neighborhoods;
pub mod shaking;
pub mod tuner;

pub use forest::{check_feasible, path_metric, solution_cost, Feasibility, Forest, InsertionPoint};
pub use instance::{BudgetMode, Instance, PathBudget, Provenance};
