//! Deterministic multi-cluster resource-management simulator and control
//! library.
//!
//! The crate models a fleet of clusters serving synthetic demand and two
//! controllers that manage replica placement over it: a forecast-driven
//! closed loop (telemetry -> features -> prediction -> policy-constrained
//! action search -> delayed execution -> feedback) and a reactive
//! threshold baseline. Runs are fully deterministic in (scenario, seed):
//! demand traces are counter-based, selection tie-breaks are total, and
//! all maps iterate in key order.

pub mod action;
pub mod controllers;
pub mod decision;
pub mod forecast;
pub mod ids;
pub mod metrics;
pub mod policy;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod telemetry;
pub mod trace;

pub use action::Action;
pub use controllers::{run, ControllerKind, ReactiveConfig, RunTrace};
pub use ids::{ClusterId, PairKey, WorkloadId};
pub use metrics::MetricsReport;
pub use scenario::{load_scenario, ScenarioConfig, ScenarioError};
pub use sim::{ResourceVector, SimState, World};
