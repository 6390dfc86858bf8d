//! Candidate generation, forecast-projected evaluation, and greedy
//! conflict-free batch selection.

use std::collections::BTreeMap;

pub use crate::action::Action;
use crate::forecast::Forecast;
use crate::ids::PairKey;
use crate::policy::{feasible, score, CooldownTracker, PolicySpec, PredictedOutcome, Violation};
use crate::sim::{apply_action, pair_latency_ms, SimState, World};

/// The selected batch plus bookkeeping about how it was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    /// Pairwise non-conflicting, at most `max_actions_per_cycle` actions;
    /// empty when nothing improves on NoOp.
    pub chosen: Vec<Action>,
    /// Predicted score of the best chosen action (NoOp's score when no
    /// action qualified).
    pub predicted_score: f64,
    pub candidates_evaluated: usize,
    /// Candidates filtered out by hard-feasibility during generation.
    pub rejected: Vec<(Action, Violation)>,
}

impl DecisionOutcome {
    pub fn no_action(noop_score: f64) -> Self {
        DecisionOutcome {
            chosen: Vec::new(),
            predicted_score: noop_score,
            candidates_evaluated: 0,
            rejected: Vec::new(),
        }
    }
}

/// Demand each pair is planned against: the step-H prediction plus the
/// safety margin, floored at zero.
pub fn project_demand(forecast: &Forecast) -> BTreeMap<PairKey, f64> {
    forecast
        .per_pair
        .iter()
        .map(|(pair, sf)| {
            (
                pair.clone(),
                (sf.at_horizon() + sf.safety_margin_rps).max(0.0),
            )
        })
        .collect()
}

/// Forecast-implied utilization of one pair under `replicas`.
fn projected_utilization(projected_rps: f64, replicas: u32, per_replica_rps: f64) -> f64 {
    let capacity = replicas as f64 * per_replica_rps;
    if capacity > 0.0 {
        projected_rps / capacity
    } else if projected_rps > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Enumerate the bounded candidate set: NoOp always; Scale deltas for every
/// pair whose forecast-implied utilization leaves the hysteresis band;
/// Migrate over every ordered cluster pair for workloads present on the
/// source. Hard-infeasible candidates are filtered out and returned with
/// their violations. The result is canonically sorted and duplicate-free.
pub fn generate_candidates(
    world: &World,
    state: &SimState,
    projected: &BTreeMap<PairKey, f64>,
    policy: &PolicySpec,
    cooldowns: &CooldownTracker,
) -> (Vec<Action>, Vec<(Action, Violation)>) {
    let mut raw = vec![Action::NoOp];

    let lo = policy.target_utilization - policy.hysteresis_band;
    let hi = policy.target_utilization + policy.hysteresis_band;
    for pair in world.pairs() {
        let w = world
            .workload(&pair.workload)
            .expect("pair from world tables");
        let demand = projected.get(&pair).copied().unwrap_or(0.0);
        let rho =
            projected_utilization(demand, state.replicas_at(&pair), w.capacity_per_replica_rps);
        if rho >= lo && rho <= hi {
            continue;
        }
        let span = policy.max_scale_delta as i32;
        for delta in -span..=span {
            if delta != 0 {
                raw.push(Action::Scale {
                    cluster: pair.cluster.clone(),
                    workload: pair.workload.clone(),
                    delta,
                });
            }
        }
    }

    for src in world.clusters() {
        for dst in world.clusters() {
            if src.cluster_id == dst.cluster_id {
                continue;
            }
            for w in world.workloads() {
                let src_pair = PairKey::new(src.cluster_id.clone(), w.workload_id.clone());
                if state.replicas_at(&src_pair) == 0 {
                    continue;
                }
                for count in 1..=policy.max_migrate_count {
                    raw.push(Action::Migrate {
                        src_cluster: src.cluster_id.clone(),
                        dst_cluster: dst.cluster_id.clone(),
                        workload: w.workload_id.clone(),
                        count,
                    });
                }
            }
        }
    }

    raw.sort();
    raw.dedup();

    let mut candidates = Vec::new();
    let mut rejected = Vec::new();
    for action in raw {
        match feasible(&action, world, state, policy, cooldowns) {
            Ok(()) => candidates.push(action),
            Err(violation) => rejected.push((action, violation)),
        }
    }
    (candidates, rejected)
}

/// Score a hard-feasible candidate against the projected demand: apply it to
/// a copy of the placement, derive latencies and utilizations at the
/// horizon, and run the policy score. The live state is untouched.
pub fn evaluate(
    candidate: &Action,
    world: &World,
    state: &SimState,
    projected: &BTreeMap<PairKey, f64>,
    policy: &PolicySpec,
    cost_normalizer: f64,
) -> f64 {
    let mut replicas = state.replicas.clone();
    // Hard-feasibility was checked at generation; a failure here would be a
    // caller bug, and scoring the unchanged placement keeps evaluate total.
    let _ = apply_action(world, &mut replicas, candidate);

    let mut outcome = PredictedOutcome {
        migrated_replicas: candidate.migrated_replicas(),
        ..Default::default()
    };
    for pair in world.pairs() {
        let w = world
            .workload(&pair.workload)
            .expect("pair from world tables");
        let demand = projected.get(&pair).copied().unwrap_or(0.0);
        let n = replicas.get(&pair).copied().unwrap_or(0);
        outcome
            .latencies_ms
            .insert(pair.clone(), pair_latency_ms(w, n, demand));
        outcome.allocated_cost += policy.replica_cost(w.request_per_replica.cpu_millicores, n);
    }
    for c in world.clusters() {
        let alloc = world.allocation_on(&replicas, &c.cluster_id);
        let util = if c.capacity.cpu_millicores > 0 {
            alloc.cpu_millicores as f64 / c.capacity.cpu_millicores as f64
        } else {
            0.0
        };
        outcome
            .cluster_cpu_utilization
            .insert(c.cluster_id.clone(), util);
    }
    score(&outcome, policy, cost_normalizer)
}

/// Greedy batch selection over scored candidates: repeatedly take the
/// lowest-score action that improves on NoOp by more than
/// `epsilon_improve` and does not conflict with anything already chosen.
/// Ties break by canonical action order, so the outcome is independent of
/// input permutation.
pub fn select(scored: &[(Action, f64)], policy: &PolicySpec) -> DecisionOutcome {
    let noop_score = scored
        .iter()
        .find(|(a, _)| matches!(a, Action::NoOp))
        .map(|(_, s)| *s)
        .unwrap_or(f64::INFINITY);

    let mut ranked: Vec<&(Action, f64)> = scored
        .iter()
        .filter(|(a, _)| !matches!(a, Action::NoOp))
        .collect();
    ranked.sort_by(|(a1, s1), (a2, s2)| s1.total_cmp(s2).then_with(|| a1.cmp(a2)));

    let mut chosen: Vec<Action> = Vec::new();
    let mut touched: Vec<PairKey> = Vec::new();
    for (action, s) in ranked {
        if chosen.len() >= policy.max_actions_per_cycle {
            break;
        }
        if *s >= noop_score - policy.epsilon_improve {
            break; // ranked ascending: nothing further qualifies either
        }
        let pairs = action.touched_pairs();
        if pairs.iter().any(|p| touched.contains(p)) {
            continue;
        }
        touched.extend(pairs);
        chosen.push(action.clone());
    }

    let predicted_score = chosen
        .first()
        .and_then(|best| scored.iter().find(|(a, _)| a == best))
        .map(|(_, s)| *s)
        .unwrap_or(noop_score);

    DecisionOutcome {
        chosen,
        predicted_score,
        candidates_evaluated: scored.len(),
        rejected: Vec::new(),
    }
}

/// Full decision pipeline over a projected demand map: generate, evaluate
/// every candidate, select a batch.
pub fn choose(
    world: &World,
    state: &SimState,
    projected: &BTreeMap<PairKey, f64>,
    policy: &PolicySpec,
    cooldowns: &CooldownTracker,
    cost_normalizer: f64,
) -> DecisionOutcome {
    let (candidates, rejected) = generate_candidates(world, state, projected, policy, cooldowns);
    let scored: Vec<(Action, f64)> = candidates
        .into_iter()
        .map(|c| {
            let s = evaluate(&c, world, state, projected, policy, cost_normalizer);
            (c, s)
        })
        .collect();
    let mut outcome = select(&scored, policy);
    outcome.rejected = rejected;
    outcome
}
