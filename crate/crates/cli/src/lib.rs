//! Command implementations for the fleetsim binary: run one controller,
//! compare both, sweep seeds, validate a scenario. All file output goes
//! through the byte-stable formatters in `fleetsim_core::report`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fleetsim_core::controllers::{run, ControllerKind, RunTrace};
use fleetsim_core::metrics::{self, MetricsReport};
use fleetsim_core::report;
use fleetsim_core::scenario::{load_scenario, ScenarioConfig, ScenarioError};

/// Exit codes: 0 success, 2 parse, 3 validation, 4 I/O.
#[derive(Debug)]
pub enum CliError {
    Scenario(ScenarioError),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(ScenarioError::Parse { .. }) => 2,
            CliError::Scenario(ScenarioError::Validation { .. }) => 3,
            CliError::Scenario(ScenarioError::Io { .. }) => 4,
            CliError::Io { .. } => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Scenario(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Scenario(e)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Execute one arm and write `trace_<controller>.csv` and
/// `summary_<controller>.json` into `out_dir`.
fn write_run_outputs(trace: &RunTrace, out_dir: &Path) -> Result<MetricsReport, CliError> {
    let metrics_report = metrics::report(trace);
    write_file(
        &out_dir.join(format!("trace_{}.csv", trace.kind)),
        &report::trace_csv(trace),
    )?;
    write_file(
        &out_dir.join(format!("summary_{}.json", trace.kind)),
        &report::summary_json(trace, &metrics_report),
    )?;
    Ok(metrics_report)
}

pub fn cmd_run(
    scenario_path: &Path,
    controller: ControllerKind,
    out_dir: &Path,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path)?;
    let trace = run(&scenario, controller, scenario.ticks, scenario.seed)?;
    let metrics_report = write_run_outputs(&trace, out_dir)?;
    println!(
        "run {} ({}): {} ticks, efficiency {}, balance {}, latency {} ms",
        scenario.name,
        controller,
        trace.records.len(),
        report::fmt_real(metrics_report.utilization_efficiency),
        report::fmt_real(metrics_report.balance_score),
        report::fmt_real(metrics_report.avg_latency_ms),
    );
    println!(
        "wrote {}",
        out_dir.join(format!("trace_{controller}.csv")).display()
    );
    Ok(())
}

/// Both arms of a comparison: identical scenario and seed, independent runs.
/// The runs execute concurrently; they share only the immutable scenario,
/// so the result is identical to running them back to back.
pub fn compare_traces(
    scenario: &ScenarioConfig,
    seed: u64,
) -> Result<(RunTrace, RunTrace), ScenarioError> {
    std::thread::scope(|scope| {
        let reactive = scope.spawn(|| {
            run(
                scenario,
                ControllerKind::ReactiveBaseline,
                scenario.ticks,
                seed,
            )
        });
        let ai = run(scenario, ControllerKind::AiDriven, scenario.ticks, seed)?;
        let reactive = reactive.join().expect("reactive run panicked")?;
        Ok((reactive, ai))
    })
}

pub fn cmd_compare(scenario_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path)?;
    let (reactive_trace, ai_trace) = compare_traces(&scenario, scenario.seed)?;
    let reactive = write_run_outputs(&reactive_trace, out_dir)?;
    let ai = write_run_outputs(&ai_trace, out_dir)?;

    let text = report::comparison_text(&scenario.name, scenario.seed, &reactive, &ai);
    write_file(&out_dir.join("comparison.txt"), &text)?;
    write_file(
        &out_dir.join("comparison.json"),
        &report::comparison_json(&scenario.name, scenario.seed, &reactive, &ai),
    )?;
    print!("{text}");
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn cmd_sweep(scenario_path: &Path, seeds: &[u64], out_dir: &Path) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path)?;
    let mut rows = String::from(
        "seed,controller,utilization_efficiency,balance_score,stability_events_per_hour,avg_latency_ms,settling_time_ticks\n",
    );
    let mut per_controller: std::collections::BTreeMap<&str, Vec<MetricsReport>> =
        Default::default();

    for &seed in seeds {
        let (reactive_trace, ai_trace) = compare_traces(&scenario, seed)?;
        let seed_dir = out_dir.join(format!("seed_{seed}"));
        let reactive = write_run_outputs(&reactive_trace, &seed_dir)?;
        let ai = write_run_outputs(&ai_trace, &seed_dir)?;
        write_file(
            &seed_dir.join("comparison.txt"),
            &report::comparison_text(&scenario.name, seed, &reactive, &ai),
        )?;
        write_file(
            &seed_dir.join("comparison.json"),
            &report::comparison_json(&scenario.name, seed, &reactive, &ai),
        )?;
        for (name, m) in [("reactive", &reactive), ("ai_driven", &ai)] {
            rows.push_str(&format!(
                "{seed},{name},{},{},{},{},{}\n",
                report::fmt_real(m.utilization_efficiency),
                report::fmt_real(m.balance_score),
                report::fmt_real(m.stability_events_per_hour),
                report::fmt_real(m.avg_latency_ms),
                m.settling_time_ticks
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "none".into()),
            ));
        }
        per_controller.entry("reactive").or_default().push(reactive);
        per_controller.entry("ai_driven").or_default().push(ai);
    }
    write_file(&out_dir.join("sweep.csv"), &rows)?;

    let mut summary = String::from("{\n  \"seeds\": ");
    summary.push_str(&format!(
        "[{}],\n  \"mean_of_means\": {{\n",
        seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    ));
    let blocks: Vec<String> = per_controller
        .iter()
        .map(|(name, reports)| {
            let eff: Vec<f64> = reports.iter().map(|r| r.utilization_efficiency).collect();
            let bal: Vec<f64> = reports.iter().map(|r| r.balance_score).collect();
            let stab: Vec<f64> = reports.iter().map(|r| r.stability_events_per_hour).collect();
            let lat: Vec<f64> = reports.iter().map(|r| r.avg_latency_ms).collect();
            format!(
                "    \"{name}\": {{\"utilization_efficiency\": {}, \"balance_score\": {}, \"stability_events_per_hour\": {}, \"avg_latency_ms\": {}}}",
                report::fmt_real(mean(&eff)),
                report::fmt_real(mean(&bal)),
                report::fmt_real(mean(&stab)),
                report::fmt_real(mean(&lat)),
            )
        })
        .collect();
    summary.push_str(&blocks.join(",\n"));
    summary.push_str("\n  }\n}\n");
    write_file(&out_dir.join("sweep_summary.json"), &summary)?;

    println!(
        "sweep over {} seed(s) written to {}",
        seeds.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_validate(scenario_path: &Path) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path)?;
    println!(
        "scenario {} ok: {} cluster(s), {} workload(s), {} tick(s), seed {}",
        scenario.name,
        scenario.clusters.len(),
        scenario.workloads.len(),
        scenario.ticks,
        scenario.seed
    );
    Ok(())
}
