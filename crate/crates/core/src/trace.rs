//! Synthetic demand traces.
//!
//! Every generator is a pure function of `(TraceSpec, tick)`. The stochastic
//! kinds draw from a counter-based generator keyed on `(seed, tick, stream)`,
//! so evaluating a future or past tick never disturbs any stream state —
//! lookahead in the decision layer sees exactly the demand the simulator
//! will serve.

use serde::{Deserialize, Serialize};

const TAU: f64 = std::f64::consts::TAU;

/// SplitMix64 finalizer. Integer-only, hence bit-identical on every platform.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based draw keyed on (seed, tick, stream).
fn draw(seed: u64, tick: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tick) ^ stream)
}

/// Uniform in [0, 1) from the top 53 bits of a draw.
fn unit(seed: u64, tick: u64, stream: u64) -> f64 {
    (draw(seed, tick, stream) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Approximately standard-normal draw (Irwin–Hall sum of 12 uniforms).
/// Uses only +,-,* so the result is reproducible across platforms.
fn gaussian(seed: u64, tick: u64) -> f64 {
    let mut sum = 0.0;
    for j in 0..12 {
        sum += unit(seed, tick, GAUSS_STREAM_BASE + j);
    }
    sum - 6.0
}

const BURST_STREAM: u64 = 1;
const JITTER_STREAM: u64 = 2;
const GAUSS_STREAM_BASE: u64 = 100;

/// sin(x) via argument reduction and a fixed Taylor polynomial. f64 add/mul
/// are IEEE-exact, so unlike libm's `sin` this is bit-identical everywhere.
pub(crate) fn det_sin(x: f64) -> f64 {
    let mut reduced = x % TAU;
    if reduced < 0.0 {
        reduced += TAU;
    }
    if reduced >= TAU {
        reduced -= TAU;
    }
    // nearest multiple of pi/2, leaving |r| <= pi/4 where the series converge
    let k = (reduced / (TAU / 4.0)).round();
    let r = reduced - k * (TAU / 4.0);
    match k as i64 % 4 {
        0 => sin_poly(r),
        1 => cos_poly(r),
        2 => -sin_poly(r),
        _ => -cos_poly(r),
    }
}

fn sin_poly(r: f64) -> f64 {
    let r2 = r * r;
    r * (1.0
        + r2 * (-1.0 / 6.0
            + r2 * (1.0 / 120.0
                + r2 * (-1.0 / 5040.0
                    + r2 * (1.0 / 362_880.0
                        + r2 * (-1.0 / 39_916_800.0 + r2 * (1.0 / 6_227_020_800.0)))))))
}

fn cos_poly(r: f64) -> f64 {
    let r2 = r * r;
    1.0 + r2
        * (-1.0 / 2.0
            + r2 * (1.0 / 24.0
                + r2 * (-1.0 / 720.0
                    + r2 * (1.0 / 40_320.0
                        + r2 * (-1.0 / 3_628_800.0 + r2 * (1.0 / 479_001_600.0))))))
}

/// Demand trace shapes. Parameters are kind-specific; see each variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    /// Flat demand at `level` rps.
    Constant { level: f64 },
    /// `base + amplitude * sin(2*pi*tick/period_ticks + phase)`, floored at 0.
    Sinusoid {
        base: f64,
        amplitude: f64,
        period_ticks: u64,
        phase: f64,
    },
    /// `base` rps with seeded spikes: each tick starts a spike with
    /// `spike_probability`; while any spike window is active demand is
    /// `base * spike_multiplier`.
    Burst {
        base: f64,
        spike_multiplier: f64,
        spike_probability: f64,
        spike_duration_ticks: u64,
    },
    /// Gaussian random walk from `start` with per-tick sigma `step_sigma`,
    /// floored at `floor`.
    RandomWalk {
        start: f64,
        step_sigma: f64,
        floor: f64,
    },
    /// `before` rps until `at_tick`, `after` rps from then on, optionally
    /// modulated by multiplicative uniform noise of half-width `jitter`.
    Step {
        before: f64,
        after: f64,
        at_tick: u64,
        #[serde(default)]
        jitter: f64,
    },
}

/// A demand trace: a shape plus the seed that keys its random draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    #[serde(flatten)]
    pub kind: TraceKind,
    #[serde(default)]
    pub seed: u64,
}

impl TraceSpec {
    pub fn constant(level: f64) -> Self {
        TraceSpec {
            kind: TraceKind::Constant { level },
            seed: 0,
        }
    }

    /// Fold a scenario-level seed into this trace's own seed so that sweeps
    /// over scenario seeds re-randomize every stochastic trace.
    pub fn with_scenario_seed(&self, scenario_seed: u64) -> TraceSpec {
        TraceSpec {
            kind: self.kind.clone(),
            seed: splitmix64(scenario_seed) ^ self.seed,
        }
    }

    /// Parameter problems, reported all at once at scenario load.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        match &self.kind {
            TraceKind::Constant { level } => {
                check(
                    level.is_finite() && *level >= 0.0,
                    "constant: level must be >= 0",
                );
            }
            TraceKind::Sinusoid {
                base,
                amplitude,
                period_ticks,
                phase,
            } => {
                check(
                    base.is_finite() && *base >= 0.0,
                    "sinusoid: base must be >= 0",
                );
                check(
                    amplitude.is_finite() && *amplitude >= 0.0,
                    "sinusoid: amplitude must be >= 0",
                );
                check(*period_ticks > 0, "sinusoid: period_ticks must be > 0");
                check(phase.is_finite(), "sinusoid: phase must be finite");
            }
            TraceKind::Burst {
                base,
                spike_multiplier,
                spike_probability,
                spike_duration_ticks,
            } => {
                check(base.is_finite() && *base >= 0.0, "burst: base must be >= 0");
                check(
                    spike_multiplier.is_finite() && *spike_multiplier >= 0.0,
                    "burst: spike_multiplier must be >= 0",
                );
                check(
                    (0.0..=1.0).contains(spike_probability),
                    "burst: spike_probability must be in [0,1]",
                );
                check(
                    *spike_duration_ticks > 0,
                    "burst: spike_duration_ticks must be > 0",
                );
            }
            TraceKind::RandomWalk {
                start,
                step_sigma,
                floor,
            } => {
                check(
                    start.is_finite() && *start >= 0.0,
                    "random_walk: start must be >= 0",
                );
                check(
                    step_sigma.is_finite() && *step_sigma >= 0.0,
                    "random_walk: step_sigma must be >= 0",
                );
                check(
                    floor.is_finite() && *floor >= 0.0,
                    "random_walk: floor must be >= 0",
                );
            }
            TraceKind::Step {
                before,
                after,
                at_tick: _,
                jitter,
            } => {
                check(
                    before.is_finite() && *before >= 0.0,
                    "step: before must be >= 0",
                );
                check(
                    after.is_finite() && *after >= 0.0,
                    "step: after must be >= 0",
                );
                check(
                    jitter.is_finite() && (0.0..1.0).contains(jitter),
                    "step: jitter must be in [0,1)",
                );
            }
        }
        problems
    }
}

/// Demand in rps at `tick`. Pure in `(trace, tick)`; always >= 0.
pub fn generate_demand(trace: &TraceSpec, tick: u64) -> f64 {
    let value = match &trace.kind {
        TraceKind::Constant { level } => *level,
        TraceKind::Sinusoid {
            base,
            amplitude,
            period_ticks,
            phase,
        } => {
            let theta = TAU * (tick % period_ticks) as f64 / *period_ticks as f64 + phase;
            base + amplitude * det_sin(theta)
        }
        TraceKind::Burst {
            base,
            spike_multiplier,
            spike_probability,
            spike_duration_ticks,
        } => {
            let lookback = spike_duration_ticks - 1;
            let from = tick.saturating_sub(lookback);
            let spiking =
                (from..=tick).any(|s| unit(trace.seed, s, BURST_STREAM) < *spike_probability);
            if spiking {
                base * spike_multiplier
            } else {
                *base
            }
        }
        TraceKind::RandomWalk {
            start,
            step_sigma,
            floor,
        } => {
            let mut value = *start;
            for i in 1..=tick {
                value += step_sigma * gaussian(trace.seed, i);
                value = value.max(*floor);
            }
            value
        }
        TraceKind::Step {
            before,
            after,
            at_tick,
            jitter,
        } => {
            let level = if tick < *at_tick { *before } else { *after };
            let noise = 2.0 * unit(trace.seed, tick, JITTER_STREAM) - 1.0;
            level * (1.0 + jitter * noise)
        }
    };
    value.max(0.0)
}
