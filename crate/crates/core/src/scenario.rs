//! Scenario configuration: the single JSON document that describes a run —
//! clusters, workloads, demand traces, policy, forecaster and baseline
//! parameters — plus loading, validation, and world construction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::ReactiveConfig;
use crate::forecast::ForecastParams;
use crate::ids::{ClusterId, PairKey, WorkloadId};
use crate::policy::PolicySpec;
use crate::sim::{ClusterSpec, ReplicaBounds, SimState, WorkloadSpec, World};
use crate::trace::TraceSpec;

fn default_tick_seconds() -> f64 {
    10.0
}

fn default_feature_window() -> usize {
    crate::telemetry::DEFAULT_FEATURE_WINDOW
}

/// NaN-safe "must be strictly positive" check for config reals.
fn not_positive(x: f64) -> bool {
    !x.is_finite() || x <= 0.0
}

/// A fully described experiment. Maps keyed by cluster id then workload id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub ticks: u64,
    /// Simulated seconds per tick; only used to convert counts to rates.
    #[serde(default = "default_tick_seconds")]
    pub tick_seconds: f64,
    /// Rolling window for telemetry feature extraction.
    #[serde(default = "default_feature_window")]
    pub feature_window: usize,
    pub clusters: Vec<ClusterSpec>,
    pub workloads: Vec<WorkloadSpec>,
    #[serde(default)]
    pub traces: BTreeMap<String, BTreeMap<String, TraceSpec>>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub forecaster: ForecastParams,
    #[serde(default)]
    pub reactive: ReactiveConfig,
    /// Pairs not listed start at their replica-bound minimum.
    #[serde(default)]
    pub initial_replicas: BTreeMap<String, BTreeMap<String, u32>>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invalid scenario:\n  {}", violations.join("\n  "))]
    Validation { violations: Vec<String> },
}

/// Read and fully validate a scenario file. Validation reports every
/// violation at once, not just the first.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    config
        .validate()
        .map_err(|violations| ScenarioError::Validation { violations })?;
    Ok(config)
}

impl ScenarioConfig {
    pub fn cluster(&self, id: &ClusterId) -> Option<&ClusterSpec> {
        self.clusters.iter().find(|c| &c.cluster_id == id)
    }

    pub fn workload(&self, id: &WorkloadId) -> Option<&WorkloadSpec> {
        self.workloads.iter().find(|w| &w.workload_id == id)
    }

    pub fn workloads(&self) -> &[WorkloadSpec] {
        &self.workloads
    }

    fn has_cluster(&self, id: &str) -> bool {
        self.clusters.iter().any(|c| c.cluster_id.as_str() == id)
    }

    fn has_workload(&self, id: &str) -> bool {
        self.workloads.iter().any(|w| w.workload_id.as_str() == id)
    }

    /// Check every structural invariant, returning the full violation list.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut v: Vec<String> = Vec::new();

        for (i, c) in self.clusters.iter().enumerate() {
            if self.clusters[..i]
                .iter()
                .any(|o| o.cluster_id == c.cluster_id)
            {
                v.push(format!("duplicate cluster_id {}", c.cluster_id));
            }
            if !c.capacity.is_strictly_positive() {
                v.push(format!(
                    "cluster {}: capacity must be strictly positive in both components",
                    c.cluster_id
                ));
            }
        }
        for (i, w) in self.workloads.iter().enumerate() {
            if self.workloads[..i]
                .iter()
                .any(|o| o.workload_id == w.workload_id)
            {
                v.push(format!("duplicate workload_id {}", w.workload_id));
            }
            if not_positive(w.capacity_per_replica_rps) {
                v.push(format!(
                    "workload {}: capacity_per_replica_rps must be > 0",
                    w.workload_id
                ));
            }
            if not_positive(w.base_service_ms) {
                v.push(format!(
                    "workload {}: base_service_ms must be > 0",
                    w.workload_id
                ));
            }
        }
        if not_positive(self.tick_seconds) {
            v.push("tick_seconds must be > 0".to_string());
        }
        if self.feature_window == 0 {
            v.push("feature_window must be >= 1".to_string());
        }

        for (cluster, by_workload) in &self.traces {
            if !self.has_cluster(cluster) {
                v.push(format!("traces: undeclared cluster \"{cluster}\""));
            }
            for (workload, trace) in by_workload {
                if !self.has_workload(workload) {
                    v.push(format!(
                        "traces[{cluster}]: undeclared workload \"{workload}\""
                    ));
                }
                for problem in trace.validate() {
                    v.push(format!("traces[{cluster}][{workload}]: {problem}"));
                }
            }
        }

        self.validate_policy(&mut v);
        self.validate_forecaster(&mut v);
        self.validate_reactive(&mut v);
        self.validate_initial_replicas(&mut v);

        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    fn validate_policy(&self, v: &mut Vec<String>) {
        let p = &self.policy;
        let weight_sum = p.weights.w_perf + p.weights.w_cost + p.weights.w_bal;
        if p.weights.w_perf < 0.0 || p.weights.w_cost < 0.0 || p.weights.w_bal < 0.0 {
            v.push("policy.weights must be non-negative".to_string());
        }
        if (weight_sum - 1.0).abs() > 1e-9 {
            v.push(format!("policy.weights must sum to 1 (got {weight_sum})"));
        }
        if not_positive(p.latency_slo_ms) {
            v.push("policy.latency_slo_ms must be > 0".to_string());
        }
        if p.cost_per_replica_tick < 0.0 {
            v.push("policy.cost_per_replica_tick must be >= 0".to_string());
        }
        if p.migration_cost_per_replica < 0.0 {
            v.push("policy.migration_cost_per_replica must be >= 0".to_string());
        }
        if p.replica_min > p.replica_max {
            v.push(format!(
                "policy.replica_min {} > replica_max {}",
                p.replica_min, p.replica_max
            ));
        }
        if !(0.0..0.5).contains(&p.hysteresis_band) {
            v.push("policy.hysteresis_band must be in [0, 0.5)".to_string());
        }
        if !(p.target_utilization > 0.0 && p.target_utilization <= 1.0) {
            v.push("policy.target_utilization must be in (0, 1]".to_string());
        }
        if p.max_actions_per_cycle == 0 {
            v.push("policy.max_actions_per_cycle must be >= 1".to_string());
        }
        if p.epsilon_improve < 0.0 {
            v.push("policy.epsilon_improve must be >= 0".to_string());
        }
        if p.max_scale_delta == 0 {
            v.push("policy.max_scale_delta must be >= 1".to_string());
        }
        if p.max_migrate_count == 0 {
            v.push("policy.max_migrate_count must be >= 1".to_string());
        }
        for (cluster, by_workload) in &p.replica_bounds {
            if !self.has_cluster(cluster) {
                v.push(format!(
                    "policy.replica_bounds: undeclared cluster \"{cluster}\""
                ));
            }
            for (workload, b) in by_workload {
                if !self.has_workload(workload) {
                    v.push(format!(
                        "policy.replica_bounds[{cluster}]: undeclared workload \"{workload}\""
                    ));
                }
                if b.min > b.max {
                    v.push(format!(
                        "policy.replica_bounds[{cluster}][{workload}]: min {} > max {}",
                        b.min, b.max
                    ));
                }
            }
        }
    }

    fn validate_forecaster(&self, v: &mut Vec<String>) {
        let f = &self.forecaster;
        if !(f.alpha > 0.0 && f.alpha <= 1.0) {
            v.push("forecaster.alpha must be in (0, 1]".to_string());
        }
        if !(f.beta > 0.0 && f.beta <= 1.0) {
            v.push("forecaster.beta must be in (0, 1]".to_string());
        }
        if f.margin_factor < 0.0 {
            v.push("forecaster.margin_factor must be >= 0".to_string());
        }
        if f.horizon == 0 {
            v.push("forecaster.horizon must be >= 1".to_string());
        }
    }

    fn validate_reactive(&self, v: &mut Vec<String>) {
        let r = &self.reactive;
        if !(r.lower_threshold >= 0.0 && r.lower_threshold < 1.0) {
            v.push("reactive.lower_threshold must be in [0, 1)".to_string());
        }
        if !(r.upper_threshold > 0.0 && r.upper_threshold <= 1.0) {
            v.push("reactive.upper_threshold must be in (0, 1]".to_string());
        }
        if r.lower_threshold >= r.upper_threshold {
            v.push("reactive.lower_threshold must be < upper_threshold".to_string());
        }
        if r.step == 0 {
            v.push("reactive.step must be >= 1".to_string());
        }
    }

    fn validate_initial_replicas(&self, v: &mut Vec<String>) {
        for (cluster, by_workload) in &self.initial_replicas {
            if !self.has_cluster(cluster) {
                v.push(format!(
                    "initial_replicas: undeclared cluster \"{cluster}\""
                ));
                continue;
            }
            for workload in by_workload.keys() {
                if !self.has_workload(workload) {
                    v.push(format!(
                        "initial_replicas[{cluster}]: undeclared workload \"{workload}\""
                    ));
                }
            }
        }
        // bounds and capacity of the fully resolved initial placement
        for c in &self.clusters {
            let mut allocated = crate::sim::ResourceVector::ZERO;
            for w in &self.workloads {
                let pair = PairKey::new(c.cluster_id.clone(), w.workload_id.clone());
                let n = self.initial_replicas_for(&pair);
                let (min, max) = self.policy.bounds_for(&pair);
                if n < min || n > max {
                    v.push(format!(
                        "initial_replicas[{pair}]: {n} outside bounds [{min}, {max}]"
                    ));
                }
                allocated = allocated.add(&w.request_per_replica.scale(n as u64));
            }
            if !allocated.fits_within(&c.capacity) {
                v.push(format!(
                    "capacity_exceeded: cluster {} initial allocation {:?} exceeds capacity {:?}",
                    c.cluster_id, allocated, c.capacity
                ));
            }
        }
    }

    /// Initial replica count for a pair: the configured value, else the
    /// pair's replica-bound minimum.
    pub fn initial_replicas_for(&self, pair: &PairKey) -> u32 {
        self.initial_replicas
            .get(pair.cluster.as_str())
            .and_then(|m| m.get(pair.workload.as_str()))
            .copied()
            .unwrap_or_else(|| self.policy.bounds_for(pair).0)
    }

    /// Build the immutable world for a run, folding `seed` into every
    /// stochastic trace so seed sweeps re-randomize demand.
    pub fn build_world(&self, seed: u64) -> World {
        let mut traces = BTreeMap::new();
        for (cluster, by_workload) in &self.traces {
            for (workload, trace) in by_workload {
                traces.insert(
                    PairKey::of(cluster, workload),
                    trace.with_scenario_seed(seed),
                );
            }
        }
        let mut bounds = BTreeMap::new();
        for (cluster, by_workload) in &self.policy.replica_bounds {
            for (workload, b) in by_workload {
                bounds.insert(
                    PairKey::of(cluster, workload),
                    ReplicaBounds {
                        min: b.min,
                        max: b.max,
                    },
                );
            }
        }
        World::new(
            self.clusters.clone(),
            self.workloads.clone(),
            traces,
            bounds,
            ReplicaBounds {
                min: self.policy.replica_min,
                max: self.policy.replica_max,
            },
        )
    }

    /// The tick-0 simulation state with every pair materialized.
    pub fn initial_state(&self, world: &World, seed: u64) -> SimState {
        let replicas = world
            .pairs()
            .into_iter()
            .map(|pair| {
                let n = self.initial_replicas_for(&pair);
                (pair, n)
            })
            .collect();
        SimState::new(replicas, seed)
    }
}
