//! Byte-stable serialization of runs: per-tick CSV traces, run summaries,
//! and the two-controller comparison table. All real numbers are printed
//! with fixed 6-decimal precision so identical runs produce identical files.

use std::collections::BTreeMap;

use crate::action::Action;
use crate::controllers::RunTrace;
use crate::ids::PairKey;
use crate::metrics::MetricsReport;

/// Table I values from the reference prototype, printed as a labeled
/// context column and never asserted against.
pub const PAPER_REFERENCE: [(&str, Option<f64>, Option<f64>); 5] = [
    ("utilization_efficiency", Some(0.62), Some(0.78)),
    ("balance_score", Some(0.71), Some(0.88)),
    ("stability_events_per_hour", Some(6.4), Some(3.1)),
    ("avg_latency_ms", Some(245.0), Some(185.0)),
    ("settling_time_ticks", None, None),
];

pub fn fmt_real(x: f64) -> String {
    format!("{x:.6}")
}

/// CSV columns: tick, cluster_id, workload_id, replicas, demand_rps,
/// served_rps, latency_ms, error_rate, cpu_util, mem_util, action_applied.
/// One row per (tick, cluster, workload), clusters and workloads ascending.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from(
        "tick,cluster_id,workload_id,replicas,demand_rps,served_rps,latency_ms,error_rate,cpu_util,mem_util,action_applied\n",
    );
    for record in &trace.records {
        let mut labels: BTreeMap<PairKey, Vec<String>> = BTreeMap::new();
        for action in &record.applied {
            match action {
                Action::NoOp => {}
                Action::Scale {
                    cluster,
                    workload,
                    delta,
                } => {
                    labels
                        .entry(PairKey::new(cluster.clone(), workload.clone()))
                        .or_default()
                        .push(format!("scale({delta:+})"));
                }
                Action::Migrate {
                    src_cluster,
                    dst_cluster,
                    workload,
                    count,
                } => {
                    labels
                        .entry(PairKey::new(src_cluster.clone(), workload.clone()))
                        .or_default()
                        .push(format!("migrate_out({count},{dst_cluster})"));
                    labels
                        .entry(PairKey::new(dst_cluster.clone(), workload.clone()))
                        .or_default()
                        .push(format!("migrate_in({count},{src_cluster})"));
                }
            }
        }
        for snap in &record.global.snapshots {
            for (workload, t) in &snap.per_workload {
                let pair = PairKey::new(snap.cluster_id.clone(), workload.clone());
                let action = labels.get(&pair).map(|l| l.join("|")).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    record.tick,
                    snap.cluster_id,
                    workload,
                    t.replicas,
                    fmt_real(t.demand_rps),
                    fmt_real(t.served_rps),
                    fmt_real(t.latency_ms),
                    fmt_real(t.error_rate),
                    fmt_real(snap.cpu_utilization),
                    fmt_real(snap.mem_utilization),
                    action,
                ));
            }
        }
    }
    out
}

fn opt_u64_json(v: Option<u64>) -> String {
    v.map(|x| x.to_string())
        .unwrap_or_else(|| "null".to_string())
}

/// Run summary as stable JSON.
pub fn summary_json(trace: &RunTrace, report: &MetricsReport) -> String {
    format!(
        r#"{{
  "scenario": "{}",
  "controller": "{}",
  "seed": {},
  "ticks": {},
  "metrics": {{
    "utilization_efficiency": {},
    "balance_score": {},
    "stability_events_per_hour": {},
    "avg_latency_ms": {},
    "settling_time_ticks": {}
  }}
}}
"#,
        trace.scenario.name,
        trace.kind,
        trace.seed,
        trace.records.len(),
        fmt_real(report.utilization_efficiency),
        fmt_real(report.balance_score),
        fmt_real(report.stability_events_per_hour),
        fmt_real(report.avg_latency_ms),
        opt_u64_json(report.settling_time_ticks),
    )
}

fn metric_values(report: &MetricsReport) -> [Option<f64>; 5] {
    [
        Some(report.utilization_efficiency),
        Some(report.balance_score),
        Some(report.stability_events_per_hour),
        Some(report.avg_latency_ms),
        report.settling_time_ticks.map(|t| t as f64),
    ]
}

fn cell(v: Option<f64>, is_ticks: bool) -> String {
    match v {
        Some(x) if is_ticks => format!("{}", x as u64),
        Some(x) => fmt_real(x),
        None => "none".to_string(),
    }
}

/// Plain-text comparison: exactly the five metric rows in fixed order, the
/// two measured columns, and the reference-prototype columns for context.
pub fn comparison_text(
    scenario_name: &str,
    seed: u64,
    reactive: &MetricsReport,
    ai: &MetricsReport,
) -> String {
    let mut out = format!("scenario: {scenario_name} (seed {seed})\n\n");
    out.push_str(&format!(
        "{:<28} {:>16} {:>16} {:>16} {:>16}\n",
        "metric", "reactive", "ai_driven", "paper_reactive", "paper_ai"
    ));
    let reactive_values = metric_values(reactive);
    let ai_values = metric_values(ai);
    for (i, (name, paper_reactive, paper_ai)) in PAPER_REFERENCE.iter().enumerate() {
        let is_ticks = *name == "settling_time_ticks";
        let paper_cell = |v: &Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<28} {:>16} {:>16} {:>16} {:>16}\n",
            name,
            cell(reactive_values[i], is_ticks),
            cell(ai_values[i], is_ticks),
            paper_cell(paper_reactive),
            paper_cell(paper_ai),
        ));
    }
    out
}

/// Machine-readable comparison with the same five rows.
pub fn comparison_json(
    scenario_name: &str,
    seed: u64,
    reactive: &MetricsReport,
    ai: &MetricsReport,
) -> String {
    let mut rows = Vec::new();
    let reactive_values = metric_values(reactive);
    let ai_values = metric_values(ai);
    for (i, (name, paper_reactive, paper_ai)) in PAPER_REFERENCE.iter().enumerate() {
        let json_cell = |v: Option<f64>| match v {
            Some(x) if *name == "settling_time_ticks" => (x as u64).to_string(),
            Some(x) => fmt_real(x),
            None => "null".to_string(),
        };
        let paper_cell = |v: &Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => "null".to_string(),
        };
        rows.push(format!(
            r#"    {{"name": "{}", "reactive": {}, "ai_driven": {}, "paper_reactive": {}, "paper_ai_driven": {}}}"#,
            name,
            json_cell(reactive_values[i]),
            json_cell(ai_values[i]),
            paper_cell(paper_reactive),
            paper_cell(paper_ai),
        ));
    }
    format!(
        "{{\n  \"scenario\": \"{}\",\n  \"seed\": {},\n  \"metrics\": [\n{}\n  ]\n}}\n",
        scenario_name,
        seed,
        rows.join(",\n")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{run, ControllerKind};
    use crate::metrics;

    fn small_trace() -> RunTrace {
        let text = r#"{
            "name": "csv-test",
            "seed": 3,
            "ticks": 4,
            "clusters": [
                {"cluster_id": "c1", "capacity": {"cpu_millicores": 2000, "memory_mib": 4096}}
            ],
            "workloads": [
                {"workload_id": "w1",
                 "request_per_replica": {"cpu_millicores": 250, "memory_mib": 256},
                 "capacity_per_replica_rps": 100.0,
                 "base_service_ms": 10.0}
            ],
            "traces": {"c1": {"w1": {"kind": "constant", "level": 130.0}}},
            "initial_replicas": {"c1": {"w1": 2}}
        }"#;
        let scenario: crate::scenario::ScenarioConfig = serde_json::from_str(text).unwrap();
        run(&scenario, ControllerKind::AiDriven, 4, 3).unwrap()
    }

    #[test]
    fn csv_has_header_and_one_row_per_tick_pair() {
        let trace = small_trace();
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[0].starts_with("tick,cluster_id,workload_id"));
        assert!(lines[1].starts_with("0,c1,w1,2,130.000000,130.000000,"));
    }

    #[test]
    fn outputs_are_byte_stable() {
        let a = small_trace();
        let b = small_trace();
        assert_eq!(trace_csv(&a), trace_csv(&b));
        let report_a = metrics::report(&a);
        let report_b = metrics::report(&b);
        assert_eq!(summary_json(&a, &report_a), summary_json(&b, &report_b));
    }

    #[test]
    fn comparison_has_exactly_five_metric_rows() {
        let trace = small_trace();
        let report = metrics::report(&trace);
        let text = comparison_text("csv-test", 3, &report, &report);
        let metric_lines = text
            .lines()
            .filter(|l| {
                PAPER_REFERENCE
                    .iter()
                    .any(|(name, _, _)| l.starts_with(name))
            })
            .count();
        assert_eq!(metric_lines, 5);
        let json = comparison_json("csv-test", 3, &report, &report);
        assert!(serde_json::from_str::<serde_json::Value>(&json).is_ok());
    }
}
