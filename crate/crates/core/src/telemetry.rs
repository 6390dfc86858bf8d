//! Per-cluster snapshots, global aggregation, and rolling-window features.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::ids::{ClusterId, PairKey, WorkloadId};
use crate::sim::{ClusterSpec, MeasurementRow, ResourceVector, WorkloadSpec};

/// Default rolling window for feature extraction, in ticks.
pub const DEFAULT_FEATURE_WINDOW: usize = 12;

/// Telemetry for one workload on one cluster at one tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkloadTelemetry {
    pub replicas: u32,
    pub demand_rps: f64,
    pub served_rps: f64,
    pub latency_ms: f64,
    /// dropped / demand; 0 when demand is 0.
    pub error_rate: f64,
}

/// Local state of one cluster at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSnapshot {
    pub tick: u64,
    pub cluster_id: ClusterId,
    /// Allocated cpu over capacity, in [0, 1] under capacity safety.
    pub cpu_utilization: f64,
    pub mem_utilization: f64,
    pub allocated: ResourceVector,
    pub capacity: ResourceVector,
    pub per_workload: BTreeMap<WorkloadId, WorkloadTelemetry>,
}

/// Build the snapshot for one cluster from this tick's raw measurements.
/// Workloads without a measurement row count as empty (zero replicas/demand).
pub fn collect(
    tick: u64,
    rows: &[MeasurementRow],
    cluster: &ClusterSpec,
    workloads: &[WorkloadSpec],
) -> ClusterSnapshot {
    let mut per_workload = BTreeMap::new();
    let mut allocated = ResourceVector::ZERO;
    for w in workloads {
        let row = rows
            .iter()
            .find(|r| r.pair.cluster == cluster.cluster_id && r.pair.workload == w.workload_id);
        let telemetry = match row {
            Some(r) => WorkloadTelemetry {
                replicas: r.replicas,
                demand_rps: r.demand_rps,
                served_rps: r.served_rps,
                latency_ms: r.latency_ms,
                error_rate: if r.demand_rps > 0.0 {
                    r.dropped_rps / r.demand_rps
                } else {
                    0.0
                },
            },
            None => WorkloadTelemetry {
                latency_ms: w.base_service_ms,
                ..Default::default()
            },
        };
        allocated = allocated.add(&w.request_per_replica.scale(telemetry.replicas as u64));
        per_workload.insert(w.workload_id.clone(), telemetry);
    }
    ClusterSnapshot {
        tick,
        cluster_id: cluster.cluster_id.clone(),
        cpu_utilization: ratio(allocated.cpu_millicores, cluster.capacity.cpu_millicores),
        mem_utilization: ratio(allocated.memory_mib, cluster.capacity.memory_mib),
        allocated,
        capacity: cluster.capacity,
        per_workload,
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Cross-cluster sums carried alongside the snapshots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Totals {
    pub demand_rps: f64,
    pub served_rps: f64,
    pub allocated: ResourceVector,
}

/// The aggregated view of every cluster at one tick. Snapshots are held in
/// ascending cluster-id order regardless of input order.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub tick: u64,
    pub snapshots: Vec<ClusterSnapshot>,
    pub totals: Totals,
}

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("no snapshots to aggregate")]
    Empty,
    #[error("snapshot ticks disagree: {0} vs {1}")]
    MixedTicks(u64, u64),
    #[error("duplicate snapshot for cluster {0}")]
    Duplicate(ClusterId),
    #[error("missing snapshot for cluster {0}")]
    Missing(ClusterId),
}

/// Merge per-cluster snapshots into the global state. Exactly one snapshot
/// per registered cluster, all at the same tick; anything else is a harness
/// bug and comes back as an error.
pub fn aggregate(
    mut snapshots: Vec<ClusterSnapshot>,
    registered: &[ClusterId],
) -> Result<GlobalState, AggregationError> {
    let first_tick = snapshots
        .first()
        .map(|s| s.tick)
        .ok_or(AggregationError::Empty)?;
    for s in &snapshots {
        if s.tick != first_tick {
            return Err(AggregationError::MixedTicks(first_tick, s.tick));
        }
    }
    snapshots.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
    for pair in snapshots.windows(2) {
        if pair[0].cluster_id == pair[1].cluster_id {
            return Err(AggregationError::Duplicate(pair[0].cluster_id.clone()));
        }
    }
    for id in registered {
        if !snapshots.iter().any(|s| &s.cluster_id == id) {
            return Err(AggregationError::Missing(id.clone()));
        }
    }

    let mut totals = Totals::default();
    for s in &snapshots {
        totals.allocated = totals.allocated.add(&s.allocated);
        for t in s.per_workload.values() {
            totals.demand_rps += t.demand_rps;
            totals.served_rps += t.served_rps;
        }
    }
    Ok(GlobalState {
        tick: first_tick,
        snapshots,
        totals,
    })
}

/// Rolling-window statistics for one series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairFeatures {
    pub window_mean_rps: f64,
    /// Ordinary-least-squares slope of demand against tick index; 0 with
    /// fewer than 2 observations.
    pub trend_slope_rps_per_tick: f64,
    pub window_peak_rps: f64,
    pub latency_mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub per_pair: BTreeMap<PairKey, PairFeatures>,
}

impl FeatureSet {
    pub fn get(&self, pair: &PairKey) -> PairFeatures {
        self.per_pair.get(pair).copied().unwrap_or_default()
    }
}

/// Window statistics over the most recent `window` global states. The caller
/// keeps the ring trimmed; anything longer is truncated to the newest ticks.
pub fn extract_features(history: &VecDeque<GlobalState>, window: usize) -> FeatureSet {
    let mut out = FeatureSet::default();
    if history.is_empty() || window == 0 {
        return out;
    }
    let start = history.len().saturating_sub(window);

    let mut demand_series: BTreeMap<PairKey, Vec<f64>> = BTreeMap::new();
    let mut latency_series: BTreeMap<PairKey, Vec<f64>> = BTreeMap::new();
    for state in history.iter().skip(start) {
        for snap in &state.snapshots {
            for (workload, t) in &snap.per_workload {
                let pair = PairKey::new(snap.cluster_id.clone(), workload.clone());
                demand_series
                    .entry(pair.clone())
                    .or_default()
                    .push(t.demand_rps);
                latency_series.entry(pair).or_default().push(t.latency_ms);
            }
        }
    }

    for (pair, demands) in demand_series {
        let latencies = &latency_series[&pair];
        let n = demands.len() as f64;
        let mean = demands.iter().sum::<f64>() / n;
        let peak = demands.iter().copied().fold(f64::MIN, f64::max);
        let latency_mean = latencies.iter().sum::<f64>() / n;
        out.per_pair.insert(
            pair,
            PairFeatures {
                window_mean_rps: mean,
                trend_slope_rps_per_tick: ols_slope(&demands),
                window_peak_rps: peak,
                latency_mean_ms: latency_mean,
            },
        );
    }
    out
}

fn ols_slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = values.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}
