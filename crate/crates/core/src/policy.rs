//! Operational objectives and hard constraints: replica bounds, capacity,
//! cooldowns as hard guards; a weighted multi-objective score over predicted
//! outcomes as the soft side. Scoring is pure; tie-breaking lives in the
//! decision layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::ids::{ClusterId, PairKey};
use crate::metrics::jain_index;
use crate::sim::{apply_action, HardViolation, SimState, World};

/// Objective weights; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub w_perf: f64,
    pub w_cost: f64,
    pub w_bal: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            w_perf: 0.5,
            w_cost: 0.3,
            w_bal: 0.2,
        }
    }
}

/// Per-pair replica bound override in scenario config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsOverride {
    pub min: u32,
    pub max: u32,
}

/// SLOs, cost rates, bounds, guards, and objective weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub latency_slo_ms: f64,
    /// Cost per cpu-core of replica request per tick.
    #[serde(default = "default_cost_per_replica_tick")]
    pub cost_per_replica_tick: f64,
    /// Default replica bounds applied to every (cluster, workload) pair.
    #[serde(default)]
    pub replica_min: u32,
    #[serde(default = "default_replica_max")]
    pub replica_max: u32,
    /// Per-pair overrides of the default bounds, keyed cluster -> workload.
    #[serde(default)]
    pub replica_bounds: BTreeMap<String, BTreeMap<String, BoundsOverride>>,
    #[serde(default = "default_cooldown_ticks")]
    pub cooldown_ticks: u64,
    /// Half-width of the no-action utilization band around the target.
    #[serde(default = "default_hysteresis_band")]
    pub hysteresis_band: f64,
    /// Center of the hysteresis band: the utilization the planner steers
    /// each series toward.
    #[serde(default = "default_target_utilization")]
    pub target_utilization: f64,
    #[serde(default)]
    pub weights: ObjectiveWeights,
    #[serde(default = "default_max_actions_per_cycle")]
    pub max_actions_per_cycle: usize,
    #[serde(default = "default_migration_cost")]
    pub migration_cost_per_replica: f64,
    /// Minimum predicted-score improvement over NoOp before an action is
    /// worth taking; suppresses churn on score noise.
    #[serde(default = "default_epsilon_improve")]
    pub epsilon_improve: f64,
    /// Largest |delta| a generated Scale candidate may carry.
    #[serde(default = "default_max_scale_delta")]
    pub max_scale_delta: u32,
    /// Largest replica count a generated Migrate candidate may carry.
    #[serde(default = "default_max_migrate_count")]
    pub max_migrate_count: u32,
}

fn default_cost_per_replica_tick() -> f64 {
    1.0
}
fn default_replica_max() -> u32 {
    20
}
fn default_cooldown_ticks() -> u64 {
    6
}
fn default_hysteresis_band() -> f64 {
    0.05
}
fn default_target_utilization() -> f64 {
    0.65
}
fn default_max_actions_per_cycle() -> usize {
    3
}
fn default_migration_cost() -> f64 {
    0.5
}
fn default_epsilon_improve() -> f64 {
    0.001
}
fn default_max_scale_delta() -> u32 {
    2
}
fn default_max_migrate_count() -> u32 {
    2
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            latency_slo_ms: 100.0,
            cost_per_replica_tick: default_cost_per_replica_tick(),
            replica_min: 0,
            replica_max: default_replica_max(),
            replica_bounds: BTreeMap::new(),
            cooldown_ticks: default_cooldown_ticks(),
            hysteresis_band: default_hysteresis_band(),
            target_utilization: default_target_utilization(),
            weights: ObjectiveWeights::default(),
            max_actions_per_cycle: default_max_actions_per_cycle(),
            migration_cost_per_replica: default_migration_cost(),
            epsilon_improve: default_epsilon_improve(),
            max_scale_delta: default_max_scale_delta(),
            max_migrate_count: default_max_migrate_count(),
        }
    }
}

impl PolicySpec {
    /// Effective bounds for a pair: the override if present, else defaults.
    pub fn bounds_for(&self, pair: &PairKey) -> (u32, u32) {
        self.replica_bounds
            .get(pair.cluster.as_str())
            .and_then(|m| m.get(pair.workload.as_str()))
            .map(|b| (b.min, b.max))
            .unwrap_or((self.replica_min, self.replica_max))
    }

    /// Cost of `replicas` replicas of a workload with `cpu_millicores`
    /// request, for one tick.
    pub fn replica_cost(&self, cpu_millicores: u64, replicas: u32) -> f64 {
        self.cost_per_replica_tick * (cpu_millicores as f64 / 1000.0) * replicas as f64
    }
}

/// A failed hard-constraint check.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("capacity_exceeded: {0}")]
    CapacityExceeded(String),
    #[error("replica_bounds: {0}")]
    ReplicaBounds(String),
    #[error("cooldown_active: {0}")]
    CooldownActive(String),
    #[error("unknown_target: {0}")]
    UnknownTarget(String),
}

impl From<HardViolation> for Violation {
    fn from(v: HardViolation) -> Self {
        match v {
            HardViolation::UnknownTarget(d) => Violation::UnknownTarget(d),
            HardViolation::ReplicaBounds(d) => Violation::ReplicaBounds(d),
            HardViolation::CapacityExceeded(d) => Violation::CapacityExceeded(d),
        }
    }
}

/// Tracks the last applied action per pair; shared by both controllers so
/// the stability comparison isolates prediction and coordination.
#[derive(Debug, Clone, Default)]
pub struct CooldownTracker {
    last_applied: BTreeMap<PairKey, u64>,
}

impl CooldownTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record actions the simulator applied at `tick`.
    pub fn mark_applied(&mut self, actions: &[Action], tick: u64) {
        for action in actions {
            for pair in action.touched_pairs() {
                self.last_applied.insert(pair, tick);
            }
        }
    }

    /// True while `pair` is within `cooldown_ticks` of its last applied
    /// action at decision time `now`.
    pub fn active(&self, pair: &PairKey, now: u64, cooldown_ticks: u64) -> bool {
        match self.last_applied.get(pair) {
            Some(&applied_at) => now < applied_at + cooldown_ticks,
            None => false,
        }
    }
}

/// Hard-feasibility check: post-action capacity fit, replica bounds, and
/// per-pair cooldown (including in-flight pending actions). NoOp is always
/// feasible.
pub fn feasible(
    action: &Action,
    world: &World,
    state: &SimState,
    policy: &PolicySpec,
    cooldowns: &CooldownTracker,
) -> Result<(), Violation> {
    if matches!(action, Action::NoOp) {
        return Ok(());
    }
    for pair in action.touched_pairs() {
        if cooldowns.active(&pair, state.tick, policy.cooldown_ticks) {
            return Err(Violation::CooldownActive(format!(
                "{pair}: within cooldown window"
            )));
        }
        if state.has_pending_on(&pair) {
            return Err(Violation::CooldownActive(format!(
                "{pair}: action already in flight"
            )));
        }
    }
    let mut replicas = state.replicas.clone();
    apply_action(world, &mut replicas, action).map_err(Violation::from)
}

/// The projected system outcome a candidate action is scored on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictedOutcome {
    /// Predicted latency per (cluster, workload) pair.
    pub latencies_ms: BTreeMap<PairKey, f64>,
    /// Predicted allocation-based cpu utilization per cluster.
    pub cluster_cpu_utilization: BTreeMap<ClusterId, f64>,
    /// Total replica cost for one tick at the projected placement.
    pub allocated_cost: f64,
    /// Replicas moved across clusters by the candidate.
    pub migrated_replicas: u32,
}

/// Fixed per-scenario normalizer for the cost term: the cost of running at
/// `replica_max` everywhere.
pub fn cost_normalizer(world: &World, policy: &PolicySpec) -> f64 {
    let mut total = 0.0;
    for pair in world.pairs() {
        let w = world
            .workload(&pair.workload)
            .expect("pair from world tables");
        let (_, max) = policy.bounds_for(&pair);
        total += policy.replica_cost(w.request_per_replica.cpu_millicores, max);
    }
    total
}

/// Weighted multi-objective cost of a predicted outcome; lower is better.
///
/// `w_perf` x mean SLO-excess ratio + `w_cost` x normalized (allocation +
/// migration) cost + `w_bal` x (1 - Jain index of cluster utilizations).
pub fn score(outcome: &PredictedOutcome, policy: &PolicySpec, cost_normalizer: f64) -> f64 {
    let perf = if outcome.latencies_ms.is_empty() {
        0.0
    } else {
        let slo = policy.latency_slo_ms;
        outcome
            .latencies_ms
            .values()
            .map(|l| (l - slo).max(0.0) / slo)
            .sum::<f64>()
            / outcome.latencies_ms.len() as f64
    };

    let migration_cost = policy.migration_cost_per_replica * outcome.migrated_replicas as f64;
    let cost = if cost_normalizer > 0.0 {
        (outcome.allocated_cost + migration_cost) / cost_normalizer
    } else {
        0.0
    };

    let utilizations: Vec<f64> = outcome.cluster_cpu_utilization.values().copied().collect();
    let balance = 1.0 - jain_index(&utilizations);

    policy.weights.w_perf * perf + policy.weights.w_cost * cost + policy.weights.w_bal * balance
}
