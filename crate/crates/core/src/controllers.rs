//! The two controllers — the forecast-driven closed loop and the reactive
//! threshold baseline — plus the run loop wiring world, telemetry, learning,
//! and execution into one feedback cycle.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::decision::{choose, project_demand, DecisionOutcome};
use crate::forecast::ForecasterState;
use crate::ids::{ClusterId, PairKey};
use crate::policy::{cost_normalizer, feasible, CooldownTracker, PolicySpec};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::sim::{self, HardViolation, SimState, World};
use crate::telemetry::{aggregate, collect, extract_features, FeatureSet, GlobalState};

/// Which controller drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    AiDriven,
    ReactiveBaseline,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerKind::AiDriven => f.write_str("ai"),
            ControllerKind::ReactiveBaseline => f.write_str("reactive"),
        }
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ai" | "ai_driven" => Ok(ControllerKind::AiDriven),
            "reactive" | "reactive_baseline" => Ok(ControllerKind::ReactiveBaseline),
            other => Err(format!(
                "unknown controller {other:?} (expected ai|reactive)"
            )),
        }
    }
}

/// Threshold autoscaler parameters for the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactiveConfig {
    #[serde(default = "default_upper_threshold")]
    pub upper_threshold: f64,
    #[serde(default = "default_lower_threshold")]
    pub lower_threshold: f64,
    #[serde(default = "default_reactive_step")]
    pub step: u32,
}

fn default_upper_threshold() -> f64 {
    0.80
}
fn default_lower_threshold() -> f64 {
    0.30
}
fn default_reactive_step() -> u32 {
    1
}

impl Default for ReactiveConfig {
    fn default() -> Self {
        ReactiveConfig {
            upper_threshold: default_upper_threshold(),
            lower_threshold: default_lower_threshold(),
            step: default_reactive_step(),
        }
    }
}

/// What the controller decided at one tick.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionRecord {
    Ai(DecisionOutcome),
    Reactive(Vec<Action>),
}

impl DecisionRecord {
    pub fn actions(&self) -> &[Action] {
        match self {
            DecisionRecord::Ai(outcome) => &outcome.chosen,
            DecisionRecord::Reactive(actions) => actions,
        }
    }
}

/// Everything recorded about one tick of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub global: GlobalState,
    pub decision: DecisionRecord,
    /// Actions the simulator applied at the start of this tick.
    pub applied: Vec<Action>,
    /// Queued actions that became infeasible by their apply tick.
    pub rejected: Vec<(Action, HardViolation)>,
}

/// Complete record of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub scenario: ScenarioConfig,
    pub kind: ControllerKind,
    pub seed: u64,
    pub records: Vec<TickRecord>,
}

/// One closed-loop decision: predict demand at the horizon, generate and
/// evaluate candidates against the projection, select a batch. Series the
/// forecaster has never observed fall back to their feature-window mean, so
/// the decision is still grounded when called outside the usual loop.
#[allow(clippy::too_many_arguments)]
pub fn ai_decide(
    world: &World,
    state: &SimState,
    global: &GlobalState,
    features: &FeatureSet,
    forecaster: &ForecasterState,
    policy: &PolicySpec,
    cooldowns: &CooldownTracker,
    cost_normalizer: f64,
) -> DecisionOutcome {
    debug_assert_eq!(
        global.tick, state.tick,
        "decide must run on current telemetry"
    );
    let forecast = forecaster.predict(forecaster.params.horizon);
    let mut projected = project_demand(&forecast);
    for pair in world.pairs() {
        if !forecaster.series(&pair).initialized {
            projected.insert(pair.clone(), features.get(&pair).window_mean_rps);
        }
    }
    choose(world, state, &projected, policy, cooldowns, cost_normalizer)
}

/// Threshold baseline: per pair independently, scale up when the pair's
/// load share exceeds the upper threshold and down below the lower one,
/// clamped to replica bounds. Never migrates — no cross-cluster view.
pub fn reactive_decide(
    world: &World,
    global: &GlobalState,
    config: &ReactiveConfig,
    state: &SimState,
    policy: &PolicySpec,
    cooldowns: &CooldownTracker,
) -> Vec<Action> {
    let mut actions = Vec::new();
    for snap in &global.snapshots {
        for (workload_id, telemetry) in &snap.per_workload {
            let Some(w) = world.workload(workload_id) else {
                continue;
            };
            let pair = PairKey::new(snap.cluster_id.clone(), workload_id.clone());
            let capacity = telemetry.replicas as f64 * w.capacity_per_replica_rps;
            let share = if capacity > 0.0 {
                telemetry.demand_rps / capacity
            } else if telemetry.demand_rps > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            let raw = if share > config.upper_threshold {
                config.step as i64
            } else if share < config.lower_threshold {
                -(config.step as i64)
            } else {
                continue;
            };
            let bounds = world.bounds(&pair);
            let current = telemetry.replicas as i64;
            let target = (current + raw).clamp(bounds.min as i64, bounds.max as i64);
            let delta = (target - current) as i32;
            if delta == 0 {
                continue;
            }
            let action = Action::Scale {
                cluster: pair.cluster.clone(),
                workload: pair.workload.clone(),
                delta,
            };
            if feasible(&action, world, state, policy, cooldowns).is_ok() {
                actions.push(action);
            }
        }
    }
    actions
}

/// Execute a full closed-loop run: per tick, serve demand (applying actions
/// that came due), observe, update the model (closed loop), decide, and
/// enqueue the chosen actions for after the actuation delay. Deterministic
/// in (scenario, kind, ticks, seed).
pub fn run(
    scenario: &ScenarioConfig,
    kind: ControllerKind,
    ticks: u64,
    seed: u64,
) -> Result<RunTrace, ScenarioError> {
    scenario
        .validate()
        .map_err(|violations| ScenarioError::Validation { violations })?;

    let world = scenario.build_world(seed);
    let mut state = scenario.initial_state(&world, seed);
    let mut cooldowns = CooldownTracker::new();
    let mut forecaster = ForecasterState::new(scenario.forecaster);
    let mut history: VecDeque<GlobalState> = VecDeque::new();
    let normalizer = cost_normalizer(&world, &scenario.policy);
    let registered: Vec<ClusterId> = world
        .clusters()
        .iter()
        .map(|c| c.cluster_id.clone())
        .collect();

    let mut records = Vec::with_capacity(ticks as usize);
    for tick in 0..ticks {
        let demands = world.demand_at(tick);
        let output = sim::apply_due_and_serve(&world, &mut state, &demands);
        cooldowns.mark_applied(&output.applied, tick);

        let snapshots = world
            .clusters()
            .iter()
            .map(|c| collect(tick, &output.rows, c, world.workloads()))
            .collect();
        let global = aggregate(snapshots, &registered).expect("one snapshot per cluster");
        history.push_back(global.clone());
        while history.len() > scenario.feature_window {
            history.pop_front();
        }

        let decision = match kind {
            ControllerKind::AiDriven => {
                forecaster.update(&demands);
                let features = extract_features(&history, scenario.feature_window);
                DecisionRecord::Ai(ai_decide(
                    &world,
                    &state,
                    &global,
                    &features,
                    &forecaster,
                    &scenario.policy,
                    &cooldowns,
                    normalizer,
                ))
            }
            ControllerKind::ReactiveBaseline => DecisionRecord::Reactive(reactive_decide(
                &world,
                &global,
                &scenario.reactive,
                &state,
                &scenario.policy,
                &cooldowns,
            )),
        };
        state.enqueue(&world, decision.actions(), tick);
        state.tick = tick + 1;

        records.push(TickRecord {
            tick,
            global,
            decision,
            applied: output.applied,
            rejected: output.rejected,
        });
    }

    Ok(RunTrace {
        scenario: scenario.clone(),
        kind,
        seed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::ForecastParams;
    use crate::ids::WorkloadId;
    use crate::policy::BoundsOverride;
    use crate::sim::{ClusterSpec, ResourceVector, WorkloadSpec};
    use crate::trace::{TraceKind, TraceSpec};
    use std::collections::BTreeMap;

    fn scenario(clusters: u32, level: f64) -> ScenarioConfig {
        let cluster_specs = (1..=clusters)
            .map(|i| ClusterSpec {
                cluster_id: ClusterId::from(format!("c{i}").as_str()),
                capacity: ResourceVector::new(4000, 8192),
                actuation_delay_ticks: 2,
            })
            .collect();
        let mut traces = BTreeMap::new();
        for i in 1..=clusters {
            let mut inner = BTreeMap::new();
            inner.insert("w1".to_string(), TraceSpec::constant(level));
            traces.insert(format!("c{i}"), inner);
        }
        let mut initial = BTreeMap::new();
        for i in 1..=clusters {
            let mut inner = BTreeMap::new();
            inner.insert("w1".to_string(), 2u32);
            initial.insert(format!("c{i}"), inner);
        }
        ScenarioConfig {
            name: "test".to_string(),
            seed: 1,
            ticks: 40,
            tick_seconds: 10.0,
            feature_window: 12,
            clusters: cluster_specs,
            workloads: vec![WorkloadSpec {
                workload_id: WorkloadId::from("w1"),
                request_per_replica: ResourceVector::new(250, 256),
                capacity_per_replica_rps: 100.0,
                base_service_ms: 10.0,
            }],
            traces,
            policy: PolicySpec {
                replica_max: 12,
                ..Default::default()
            },
            forecaster: ForecastParams::default(),
            reactive: ReactiveConfig::default(),
            initial_replicas: initial,
        }
    }

    fn snapshot_global(
        scenario: &ScenarioConfig,
        demand: f64,
        replicas: u32,
    ) -> (World, SimState, GlobalState) {
        let world = scenario.build_world(scenario.seed);
        let mut state = scenario.initial_state(&world, scenario.seed);
        for pair in world.pairs() {
            state.replicas.insert(pair, replicas);
        }
        let mut demands = BTreeMap::new();
        for pair in world.pairs() {
            demands.insert(pair, demand);
        }
        let output = sim::apply_due_and_serve(&world, &mut state, &demands);
        let registered: Vec<ClusterId> = world
            .clusters()
            .iter()
            .map(|c| c.cluster_id.clone())
            .collect();
        let snapshots = world
            .clusters()
            .iter()
            .map(|c| collect(0, &output.rows, c, world.workloads()))
            .collect();
        let global = aggregate(snapshots, &registered).unwrap();
        (world, state, global)
    }

    #[test]
    fn reactive_scales_up_above_threshold() {
        // share 0.85 with 2 replicas x 100 rps -> demand 170
        let s = scenario(1, 170.0);
        let (world, state, global) = snapshot_global(&s, 170.0, 2);
        let actions = reactive_decide(
            &world,
            &global,
            &s.reactive,
            &state,
            &s.policy,
            &CooldownTracker::new(),
        );
        assert_eq!(actions, vec![Action::scale("c1", "w1", 1)]);
    }

    #[test]
    fn reactive_holds_inside_band() {
        let s = scenario(1, 100.0);
        let (world, state, global) = snapshot_global(&s, 100.0, 2); // share 0.5
        let actions = reactive_decide(
            &world,
            &global,
            &s.reactive,
            &state,
            &s.policy,
            &CooldownTracker::new(),
        );
        assert!(actions.is_empty());
    }

    #[test]
    fn reactive_clamps_at_replica_min() {
        let mut s = scenario(1, 20.0);
        let mut inner = BTreeMap::new();
        inner.insert("w1".to_string(), BoundsOverride { min: 2, max: 12 });
        s.policy.replica_bounds.insert("c1".to_string(), inner);
        let (world, state, global) = snapshot_global(&s, 20.0, 2); // share 0.1
        let actions = reactive_decide(
            &world,
            &global,
            &s.reactive,
            &state,
            &s.policy,
            &CooldownTracker::new(),
        );
        assert!(actions.is_empty());
    }

    #[test]
    fn ai_holds_steady_when_provisioned_at_target() {
        // demand 130 on 2 replicas x 100 rps = utilization 0.65 = target
        let s = scenario(1, 130.0);
        let trace = run(&s, ControllerKind::AiDriven, 40, s.seed).unwrap();
        for record in &trace.records {
            assert!(record.decision.actions().is_empty(), "tick {}", record.tick);
            assert!(record.applied.is_empty());
        }
    }

    #[test]
    fn ai_scales_up_on_demand_step() {
        let mut s = scenario(1, 0.0);
        s.traces.get_mut("c1").unwrap().insert(
            "w1".to_string(),
            TraceSpec {
                kind: TraceKind::Step {
                    before: 100.0,
                    after: 300.0,
                    at_tick: 20,
                    jitter: 0.0,
                },
                seed: 0,
            },
        );
        s.ticks = 40;
        let trace = run(&s, ControllerKind::AiDriven, 40, s.seed).unwrap();
        let scaled_up = trace.records.iter().any(|r| {
            r.tick >= 20
                && r.decision
                    .actions()
                    .iter()
                    .any(|a| matches!(a, Action::Scale { delta, .. } if *delta > 0))
        });
        assert!(scaled_up, "expected a scale-up after the step");
    }

    #[test]
    fn ai_migrates_from_hot_to_cold_cluster() {
        let s = scenario(2, 50.0);
        let world = s.build_world(s.seed);
        let mut state = s.initial_state(&world, s.seed);
        // c1 heavily allocated (0.9), c2 nearly idle (0.125)
        state.replicas.insert(PairKey::of("c1", "w1"), 12);
        state.replicas.insert(PairKey::of("c2", "w1"), 2);
        let mut policy = s.policy.clone();
        policy.cost_per_replica_tick = 0.0;
        policy.migration_cost_per_replica = 0.0;

        let mut demands = BTreeMap::new();
        for pair in world.pairs() {
            demands.insert(pair, 50.0);
        }
        let output = sim::apply_due_and_serve(&world, &mut state, &demands);
        let registered: Vec<ClusterId> = world
            .clusters()
            .iter()
            .map(|c| c.cluster_id.clone())
            .collect();
        let snapshots = world
            .clusters()
            .iter()
            .map(|c| collect(0, &output.rows, c, world.workloads()))
            .collect();
        let global = aggregate(snapshots, &registered).unwrap();

        let mut forecaster = ForecasterState::new(s.forecaster);
        forecaster.update(&demands);
        let features = extract_features(&VecDeque::from([global.clone()]), 12);
        let outcome = ai_decide(
            &world,
            &state,
            &global,
            &features,
            &forecaster,
            &policy,
            &CooldownTracker::new(),
            cost_normalizer(&world, &policy),
        );
        let migrated = outcome.chosen.iter().any(|a| {
            matches!(a, Action::Migrate { src_cluster, dst_cluster, .. }
                if src_cluster.as_str() == "c1" && dst_cluster.as_str() == "c2")
        });
        assert!(
            migrated,
            "expected hot->cold migration, got {:?}",
            outcome.chosen
        );
    }

    #[test]
    fn zero_tick_run_is_empty() {
        let s = scenario(1, 100.0);
        let trace = run(&s, ControllerKind::AiDriven, 0, s.seed).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.seed, 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut s = scenario(2, 0.0);
        for i in 1..=2 {
            s.traces.get_mut(&format!("c{i}")).unwrap().insert(
                "w1".to_string(),
                TraceSpec {
                    kind: TraceKind::Burst {
                        base: 150.0,
                        spike_multiplier: 3.0,
                        spike_probability: 0.1,
                        spike_duration_ticks: 3,
                    },
                    seed: i,
                },
            );
        }
        for kind in [ControllerKind::AiDriven, ControllerKind::ReactiveBaseline] {
            let a = run(&s, kind, 120, 42).unwrap();
            let b = run(&s, kind, 120, 42).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_scenario_aborts_before_tick_zero() {
        let mut s = scenario(1, 100.0);
        s.policy.weights.w_perf = 9.0;
        s.reactive.step = 0;
        let err = run(&s, ControllerKind::AiDriven, 10, 1).unwrap_err();
        match err {
            ScenarioError::Validation { violations } => {
                assert!(violations.len() >= 2, "{violations:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn reactive_never_migrates_and_chosen_actions_apply_after_delay() {
        let mut s = scenario(2, 0.0);
        for i in 1..=2 {
            s.traces.get_mut(&format!("c{i}")).unwrap().insert(
                "w1".to_string(),
                TraceSpec {
                    kind: TraceKind::Burst {
                        base: 160.0,
                        spike_multiplier: 4.0,
                        spike_probability: 0.15,
                        spike_duration_ticks: 4,
                    },
                    seed: 3 + i,
                },
            );
        }
        let trace = run(&s, ControllerKind::ReactiveBaseline, 200, 11).unwrap();
        let mut expected: BTreeMap<u64, Vec<Action>> = BTreeMap::new();
        for record in &trace.records {
            for action in record.decision.actions() {
                assert!(!matches!(action, Action::Migrate { .. }));
                // delay is 2 for every cluster in this scenario
                expected
                    .entry(record.tick + 2)
                    .or_default()
                    .push(action.clone());
            }
        }
        for record in &trace.records {
            let due = expected.remove(&record.tick).unwrap_or_default();
            let handled = record.applied.len() + record.rejected.len();
            assert_eq!(due.len(), handled, "tick {}", record.tick);
        }
    }

    #[test]
    fn capacity_and_bounds_hold_at_every_tick() {
        let mut s = scenario(3, 0.0);
        for i in 1..=3 {
            s.traces.get_mut(&format!("c{i}")).unwrap().insert(
                "w1".to_string(),
                TraceSpec {
                    kind: TraceKind::Burst {
                        base: 200.0,
                        spike_multiplier: 4.0,
                        spike_probability: 0.1,
                        spike_duration_ticks: 3,
                    },
                    seed: 10 + i,
                },
            );
        }
        for kind in [ControllerKind::AiDriven, ControllerKind::ReactiveBaseline] {
            let trace = run(&s, kind, 250, 5).unwrap();
            let world = s.build_world(5);
            for record in &trace.records {
                for snap in &record.global.snapshots {
                    assert!(
                        snap.allocated.fits_within(&snap.capacity),
                        "tick {}",
                        record.tick
                    );
                    for (workload, t) in &snap.per_workload {
                        let pair = PairKey::new(snap.cluster_id.clone(), workload.clone());
                        let b = world.bounds(&pair);
                        assert!(t.replicas >= b.min && t.replicas <= b.max);
                    }
                }
            }
        }
    }
}
