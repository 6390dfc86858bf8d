//! Online per-series demand prediction: Holt's linear (double exponential)
//! smoothing, one level/trend pair per (cluster, workload) series, updated
//! every tick from observed demand.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::PairKey;

/// Weight of the newest absolute error in the error EWMA.
const ERROR_EWMA_WEIGHT: f64 = 0.1;

/// Smoothing parameters, fixed per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastParams {
    pub alpha: f64,
    pub beta: f64,
    /// Multiplier on the error EWMA that becomes the safety margin.
    pub margin_factor: f64,
    /// Prediction horizon in ticks.
    pub horizon: u32,
}

impl Default for ForecastParams {
    fn default() -> Self {
        ForecastParams {
            alpha: 0.5,
            beta: 0.3,
            margin_factor: 1.5,
            horizon: 3,
        }
    }
}

/// Level/trend state of one series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SeriesState {
    pub level: f64,
    pub trend: f64,
    pub abs_error_ewma: f64,
    pub initialized: bool,
}

impl SeriesState {
    fn one_step_prediction(&self) -> f64 {
        (self.level + self.trend).max(0.0)
    }
}

/// All per-series smoothing state owned by one controller instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterState {
    pub params: ForecastParams,
    series: BTreeMap<PairKey, SeriesState>,
}

impl ForecasterState {
    pub fn new(params: ForecastParams) -> Self {
        ForecasterState {
            params,
            series: BTreeMap::new(),
        }
    }

    pub fn series(&self, pair: &PairKey) -> SeriesState {
        self.series.get(pair).copied().unwrap_or_default()
    }

    /// Holt update for every observed series. The first observation of a
    /// series sets `level = y, trend = 0`; there is no prior prediction yet,
    /// so the error EWMA is left untouched on that tick.
    pub fn update(&mut self, observed: &BTreeMap<PairKey, f64>) {
        let alpha = self.params.alpha;
        let beta = self.params.beta;
        for (pair, &y) in observed {
            let entry = self.series.entry(pair.clone()).or_default();
            if !entry.initialized {
                entry.level = y;
                entry.trend = 0.0;
                entry.initialized = true;
                continue;
            }
            let prior_prediction = entry.one_step_prediction();
            entry.abs_error_ewma = ERROR_EWMA_WEIGHT * (y - prior_prediction).abs()
                + (1.0 - ERROR_EWMA_WEIGHT) * entry.abs_error_ewma;
            let prev_level = entry.level;
            entry.level = alpha * y + (1.0 - alpha) * (prev_level + entry.trend);
            entry.trend = beta * (entry.level - prev_level) + (1.0 - beta) * entry.trend;
        }
    }

    /// Forecast every known series `horizon` steps out.
    pub fn predict(&self, horizon: u32) -> Forecast {
        let mut per_pair = BTreeMap::new();
        for (pair, s) in &self.series {
            let (predicted, margin) = if s.initialized {
                let values = (1..=horizon)
                    .map(|h| (s.level + h as f64 * s.trend).max(0.0))
                    .collect();
                (values, self.params.margin_factor * s.abs_error_ewma)
            } else {
                (vec![0.0; horizon as usize], 0.0)
            };
            per_pair.insert(
                pair.clone(),
                SeriesForecast {
                    predicted_rps: predicted,
                    safety_margin_rps: margin,
                },
            );
        }
        Forecast { horizon, per_pair }
    }
}

/// Horizon predictions plus the uncertainty-derived safety margin for one
/// series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesForecast {
    /// Steps 1..=H, each floored at 0.
    pub predicted_rps: Vec<f64>,
    pub safety_margin_rps: f64,
}

impl SeriesForecast {
    /// Prediction at the final horizon step.
    pub fn at_horizon(&self) -> f64 {
        self.predicted_rps.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub horizon: u32,
    pub per_pair: BTreeMap<PairKey, SeriesForecast>,
}

impl Forecast {
    pub fn get(&self, pair: &PairKey) -> Option<&SeriesForecast> {
        self.per_pair.get(pair)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn observe(fc: &mut ForecasterState, pair: &PairKey, y: f64) {
        let mut m = BTreeMap::new();
        m.insert(pair.clone(), y);
        fc.update(&m);
    }

    #[test]
    fn first_observation_initializes() {
        let mut fc = ForecasterState::new(ForecastParams::default());
        let pair = PairKey::of("c1", "w1");
        observe(&mut fc, &pair, 7.0);
        let s = fc.series(&pair);
        assert!(s.initialized);
        assert_eq!(s.level, 7.0);
        assert_eq!(s.trend, 0.0);
        assert_eq!(s.abs_error_ewma, 0.0);
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let mut fc = ForecasterState::new(ForecastParams::default());
        let pair = PairKey::of("c1", "w1");
        for _ in 0..50 {
            observe(&mut fc, &pair, 42.0);
        }
        let s = fc.series(&pair);
        assert!((s.level - 42.0).abs() < 1e-9);
        assert!(s.trend.abs() < 1e-9);
    }

    // Hand-applied update equations with alpha = beta = 1 on [0, 10]:
    //   init: level = 0, trend = 0
    //   y = 10: level' = 1*10 = 10, trend' = 1*(10 - 0) = 10
    //   error ewma = 0.1 * |10 - 0| = 1.0
    #[test]
    fn unit_smoothing_hand_computed() {
        let params = ForecastParams {
            alpha: 1.0,
            beta: 1.0,
            margin_factor: 1.5,
            horizon: 3,
        };
        let mut fc = ForecasterState::new(params);
        let pair = PairKey::of("c1", "w1");
        observe(&mut fc, &pair, 0.0);
        observe(&mut fc, &pair, 10.0);
        let s = fc.series(&pair);
        assert_eq!(s.level, 10.0);
        assert_eq!(s.trend, 10.0);
        assert!((s.abs_error_ewma - 1.0).abs() < 1e-12);
        // continuation: h = 1 prediction is level + trend = 20
        let f = fc.predict(1);
        assert_eq!(f.get(&pair).unwrap().predicted_rps[0], 20.0);
    }

    #[test]
    fn flat_forecast_without_trend() {
        let params = ForecastParams {
            alpha: 1.0,
            beta: 1.0,
            ..Default::default()
        };
        let mut fc = ForecasterState::new(params);
        let pair = PairKey::of("c1", "w1");
        observe(&mut fc, &pair, 100.0);
        observe(&mut fc, &pair, 100.0);
        let f = fc.predict(3);
        assert_eq!(
            f.get(&pair).unwrap().predicted_rps,
            vec![100.0, 100.0, 100.0]
        );
    }

    #[test]
    fn predictions_are_floored_at_zero() {
        let mut fc = ForecasterState::new(ForecastParams::default());
        let pair = PairKey::of("c1", "w1");
        // force a steeply negative trend
        let s = SeriesState {
            level: 5.0,
            trend: -10.0,
            abs_error_ewma: 0.0,
            initialized: true,
        };
        fc.series.insert(pair.clone(), s);
        let f = fc.predict(2);
        assert_eq!(f.get(&pair).unwrap().predicted_rps, vec![0.0, 0.0]);
    }

    #[test]
    fn uninitialized_series_predicts_zero() {
        let mut fc = ForecasterState::new(ForecastParams::default());
        fc.series
            .insert(PairKey::of("c1", "w1"), SeriesState::default());
        let f = fc.predict(3);
        let sf = f.get(&PairKey::of("c1", "w1")).unwrap();
        assert_eq!(sf.predicted_rps, vec![0.0, 0.0, 0.0]);
        assert_eq!(sf.safety_margin_rps, 0.0);
    }

    #[test]
    fn series_are_independent() {
        let mut fc = ForecasterState::new(ForecastParams::default());
        let a = PairKey::of("c1", "w1");
        let b = PairKey::of("c2", "w1");
        observe(&mut fc, &a, 10.0);
        observe(&mut fc, &b, 99.0);
        let before = fc.series(&a);
        observe(&mut fc, &b, 120.0);
        observe(&mut fc, &b, 140.0);
        assert_eq!(fc.series(&a), before);
    }

    // On an exactly linear series the one-step error decays geometrically;
    // after 50 ticks it must be under 1% of the series mean.
    #[test]
    fn linear_series_converges() {
        let params = ForecastParams {
            alpha: 0.5,
            beta: 0.5,
            margin_factor: 1.5,
            horizon: 1,
        };
        let mut fc = ForecasterState::new(params);
        let pair = PairKey::of("c1", "w1");
        let series: Vec<f64> = (0..50).map(|t| 3.0 + 2.0 * t as f64).collect();
        for y in &series {
            observe(&mut fc, &pair, *y);
        }
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let next = 3.0 + 2.0 * 50.0;
        let predicted = fc.predict(1).get(&pair).unwrap().predicted_rps[0];
        assert!(
            (predicted - next).abs() / mean < 0.01,
            "one-step error too large: predicted {predicted}, actual {next}"
        );
    }

    #[test]
    fn safety_margin_scales_error_ewma() {
        let params = ForecastParams {
            alpha: 0.5,
            beta: 0.3,
            margin_factor: 1.5,
            horizon: 1,
        };
        let mut fc = ForecasterState::new(params);
        let pair = PairKey::of("c1", "w1");
        observe(&mut fc, &pair, 100.0);
        observe(&mut fc, &pair, 200.0); // error 100 -> ewma 10
        let f = fc.predict(1);
        assert!((f.get(&pair).unwrap().safety_margin_rps - 15.0).abs() < 1e-9);
    }
}
