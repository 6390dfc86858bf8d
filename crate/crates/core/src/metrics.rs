//! Run-level evaluation metrics: utilization efficiency, cross-cluster
//! balance, scaling stability, served-weighted latency, and settling time.

use crate::action::Action;
use crate::controllers::RunTrace;
use crate::ids::PairKey;

/// Default window within which an opposing scale counts as a reversal.
pub const DEFAULT_REVERSAL_WINDOW_TICKS: u64 = 30;

/// Default tolerance fraction for settling-time detection.
pub const DEFAULT_SETTLING_TOLERANCE: f64 = 0.05;

/// The comparison-table metrics computed from one complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub utilization_efficiency: f64,
    pub balance_score: f64,
    pub stability_events_per_hour: f64,
    pub avg_latency_ms: f64,
    pub settling_time_ticks: Option<u64>,
}

/// Jain's fairness index: `(sum u)^2 / (n * sum u^2)`. 1 at perfect balance,
/// approaching 1/n at maximal imbalance. All-zero input is defined as 1.
pub fn jain_index(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return 1.0;
    }
    (sum * sum) / (values.len() as f64 * sum_sq)
}

/// Mean over ticks of the per-tick ratio of demand-implied resource use to
/// allocated resources, averaged over the cpu and memory components.
/// Demand-implied use of a pair is `(served / capacity_per_replica_rps) *
/// request_per_replica`, which never exceeds its allocation.
pub fn utilization_efficiency(trace: &RunTrace) -> f64 {
    if trace.records.is_empty() {
        return 0.0;
    }
    let mut tick_sum = 0.0;
    for record in &trace.records {
        let mut use_cpu = 0.0;
        let mut use_mem = 0.0;
        let mut alloc_cpu = 0.0;
        let mut alloc_mem = 0.0;
        let mut demand_total = 0.0;
        for snap in &record.global.snapshots {
            for (workload_id, t) in &snap.per_workload {
                let w = trace
                    .scenario
                    .workload(workload_id)
                    .expect("workload in scenario");
                let busy_replicas = t.served_rps / w.capacity_per_replica_rps;
                use_cpu += busy_replicas * w.request_per_replica.cpu_millicores as f64;
                use_mem += busy_replicas * w.request_per_replica.memory_mib as f64;
                alloc_cpu += (t.replicas as u64 * w.request_per_replica.cpu_millicores) as f64;
                alloc_mem += (t.replicas as u64 * w.request_per_replica.memory_mib) as f64;
                demand_total += t.demand_rps;
            }
        }
        let component = |used: f64, alloc: f64| {
            if alloc == 0.0 {
                if demand_total == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                used.min(alloc) / alloc
            }
        };
        tick_sum += (component(use_cpu, alloc_cpu) + component(use_mem, alloc_mem)) / 2.0;
    }
    tick_sum / trace.records.len() as f64
}

/// Mean over ticks of the Jain index of per-cluster cpu utilizations.
pub fn balance_score(trace: &RunTrace) -> f64 {
    if trace.records.is_empty() {
        return 1.0;
    }
    let mut sum = 0.0;
    for record in &trace.records {
        let utils: Vec<f64> = record
            .global
            .snapshots
            .iter()
            .map(|s| s.cpu_utilization)
            .collect();
        sum += jain_index(&utils);
    }
    sum / trace.records.len() as f64
}

/// Count of applied Scale actions whose sign opposes the previous applied
/// Scale on the same pair within `window` ticks, counting from `from_tick`.
pub fn count_reversals(trace: &RunTrace, window: u64, from_tick: u64) -> u64 {
    let mut last: std::collections::BTreeMap<PairKey, (i64, u64)> = Default::default();
    let mut reversals = 0;
    for record in &trace.records {
        for action in &record.applied {
            let Action::Scale {
                cluster,
                workload,
                delta,
            } = action
            else {
                continue;
            };
            let pair = PairKey::new(cluster.clone(), workload.clone());
            let sign = (*delta).signum() as i64;
            if let Some((prev_sign, prev_tick)) = last.get(&pair) {
                if sign != *prev_sign
                    && record.tick >= from_tick
                    && record.tick.saturating_sub(*prev_tick) <= window
                {
                    reversals += 1;
                }
            }
            last.insert(pair, (sign, record.tick));
        }
    }
    reversals
}

/// Reversals per simulated hour over the whole run.
pub fn stability_events(trace: &RunTrace, reversal_window_ticks: u64) -> f64 {
    let hours = trace.records.len() as f64 * trace.scenario.tick_seconds / 3600.0;
    if hours == 0.0 {
        return 0.0;
    }
    count_reversals(trace, reversal_window_ticks, 0) as f64 / hours
}

/// Served-request-weighted mean latency over all ticks and workloads. If
/// nothing was served over the whole run, falls back to the mean of the
/// workloads' base service times.
pub fn avg_latency(trace: &RunTrace) -> f64 {
    let mut weighted = 0.0;
    let mut served = 0.0;
    for record in &trace.records {
        for snap in &record.global.snapshots {
            for t in snap.per_workload.values() {
                weighted += t.latency_ms * t.served_rps;
                served += t.served_rps;
            }
        }
    }
    if served > 0.0 {
        weighted / served
    } else {
        let workloads = trace.scenario.workloads();
        if workloads.is_empty() {
            0.0
        } else {
            workloads.iter().map(|w| w.base_service_ms).sum::<f64>() / workloads.len() as f64
        }
    }
}

/// Smallest index after which every value stays within
/// `tolerance_fraction` of the series' final value, where "final" is the
/// mean of the last 10% of the series. `None` if the series only enters the
/// band inside that end window (or never).
pub fn settling_time(series: &[f64], tolerance_fraction: f64) -> Option<u64> {
    if series.is_empty() {
        return None;
    }
    let n = series.len();
    let window = (n / 10).max(1);
    let final_value = series[n - window..].iter().sum::<f64>() / window as f64;
    let band = tolerance_fraction * final_value.abs();

    let mut settled_from = n;
    for i in (0..n).rev() {
        if (series[i] - final_value).abs() <= band {
            settled_from = i;
        } else {
            break;
        }
    }
    if settled_from >= n - window {
        None
    } else {
        Some(settled_from as u64)
    }
}

/// Total allocated cpu millicores per tick — the convergence series used
/// for settling-time comparison.
pub fn allocation_series(trace: &RunTrace) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| r.global.totals.allocated.cpu_millicores as f64)
        .collect()
}

/// All metrics of one run at the default windows and tolerances.
pub fn report(trace: &RunTrace) -> MetricsReport {
    MetricsReport {
        utilization_efficiency: utilization_efficiency(trace),
        balance_score: balance_score(trace),
        stability_events_per_hour: stability_events(trace, DEFAULT_REVERSAL_WINDOW_TICKS),
        avg_latency_ms: avg_latency(trace),
        settling_time_ticks: settling_time(&allocation_series(trace), DEFAULT_SETTLING_TOLERANCE),
    }
}
