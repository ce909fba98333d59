//! Residual-based attack detector with per-state CUSUM accumulation
//! for stealthy bias, plus calibration from attack-free traces.
//!
//! The residual is the per-state absolute difference between the model
//! prediction (one EKF predict off the previous corrected estimate)
//! and the state derived from sensors.

use crate::error::{Error, Result};
use crate::state::{StateVector, STATE_DIM};
use serde::{Deserialize, Serialize};

/// Per-state thresholds of the detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Instant-residual alarm threshold per state.
    pub tau_inst: [f64; STATE_DIM],
    /// CUSUM drift allowance per state.
    pub drift: [f64; STATE_DIM],
    /// CUSUM alarm threshold per state.
    pub tau_cusum: [f64; STATE_DIM],
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self
            .tau_inst
            .iter()
            .chain(self.drift.iter())
            .chain(self.tau_cusum.iter())
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("detector thresholds must be positive".into()))
        }
    }
}

/// Running accumulator state; alarms on any state channel.
#[derive(Debug, Clone)]
pub struct DetectorState {
    /// Reset-at-zero CUSUM accumulator per state.
    pub cusum: [f64; STATE_DIM],
    pub alert: bool,
    pub alert_onset: Option<f64>,
    /// States that alarmed at the most recent step.
    pub alarmed_states: Vec<usize>,
}

impl Default for DetectorState {
    fn default() -> Self {
        DetectorState {
            cusum: [0.0; STATE_DIM],
            alert: false,
            alert_onset: None,
            alarmed_states: Vec::new(),
        }
    }
}

impl DetectorState {
    pub fn reset(&mut self) {
        *self = DetectorState::default();
    }
}

/// Elementwise absolute difference, wrapped on angle channels.
pub fn residual(model_state: &StateVector, sensor_state: &StateVector) -> [f64; STATE_DIM] {
    let mut r = [0.0; STATE_DIM];
    for (i, ri) in r.iter_mut().enumerate() {
        *ri = model_state.component_distance(sensor_state, i);
    }
    r
}

/// One detector update. Per state: an instant alarm if the residual
/// exceeds tau_inst, a CUSUM alarm if the accumulator crosses
/// tau_cusum. A NaN residual means the channel had no fresh reading
/// this step; its accumulator is left untouched. Returns whether any
/// state alarms this step.
pub fn detect_step(
    det: &mut DetectorState,
    cfg: &DetectorConfig,
    r: &[f64; STATE_DIM],
    t: f64,
) -> bool {
    let mut any = false;
    det.alarmed_states.clear();
    for i in 0..STATE_DIM {
        if r[i].is_nan() {
            continue;
        }
        det.cusum[i] = (det.cusum[i] + r[i] - cfg.drift[i]).max(0.0);
        let alarm = r[i] > cfg.tau_inst[i] || det.cusum[i] > cfg.tau_cusum[i];
        if alarm {
            det.alarmed_states.push(i);
            any = true;
        }
    }
    if any {
        det.alert = true;
        if det.alert_onset.is_none() {
            det.alert_onset = Some(t);
        }
    }
    any
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn stdev(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

/// Calibrate thresholds from per-mission residual streams of
/// attack-free runs.
///
/// tau_inst = median + 3 stdev, floored at 1.3 x the largest benign
/// residual so the calibration traces never alarm and held-out runs
/// keep headroom; drift = 99th percentile; tau_cusum = 4 x the largest
/// accumulator value any calibration trace reaches. NaN samples
/// (channel not fresh that step) are excluded throughout.
pub fn calibrate_detector(attack_free_traces: &[Vec<[f64; STATE_DIM]>]) -> Result<DetectorConfig> {
    if attack_free_traces.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "detector calibration needs >= 10 attack-free missions, got {}",
            attack_free_traces.len()
        )));
    }
    if attack_free_traces.iter().all(|t| t.is_empty()) {
        return Err(Error::InsufficientData("empty residual traces".into()));
    }

    let mut tau_inst = [0.0; STATE_DIM];
    let mut drift = [0.0; STATE_DIM];
    let mut tau_cusum = [0.0; STATE_DIM];

    for i in 0..STATE_DIM {
        let mut pooled: Vec<f64> = attack_free_traces
            .iter()
            .flat_map(|trace| trace.iter().map(move |r| r[i]))
            .filter(|v| !v.is_nan())
            .collect();
        if pooled.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no fresh residual samples for state {i}"
            )));
        }
        let sd = stdev(&pooled);
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = median(&pooled);
        let max_obs = *pooled.last().unwrap();
        tau_inst[i] = (med + 3.0 * sd).max(1.3 * max_obs).max(1e-12);
        drift[i] = percentile(&pooled, 0.99).max(1e-12);

        // Replay the CUSUM recursion per mission to find the largest
        // accumulator excursion under the chosen drift.
        let mut max_s: f64 = 0.0;
        for trace in attack_free_traces {
            let mut s: f64 = 0.0;
            for r in trace {
                if r[i].is_nan() {
                    continue;
                }
                s = (s + r[i] - drift[i]).max(0.0);
                max_s = max_s.max(s);
            }
        }
        tau_cusum[i] = (max_s * 4.0).max(tau_inst[i]);
    }

    let cfg = DetectorConfig {
        tau_inst,
        drift,
        tau_cusum,
    };
    cfg.validate()?;
    Ok(cfg)
}
