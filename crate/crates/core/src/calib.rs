//! End-to-end calibration: attack-free ensembles fix the detector
//! thresholds and the diagnosis deltas, a stealthy-attack ensemble
//! sizes the detection window, and the recovery gain is synthesized
//! from the vehicle model.

use crate::attack::{AttackSpec, StealthProfile};
use crate::checkpoint::calibrate_window_size;
use crate::control::{lqr_gain, LqrGain};
use crate::detect::{calibrate_detector, detect_step, DetectorConfig, DetectorState};
use crate::diagnose::{calibrate_delta, DeltaProfile};
use crate::error::Result;
use crate::mission::{run_mission, GuardConfig, MissionConfig, MissionSetup};
use crate::sensing::SensorId;
use crate::state::idx;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Everything a protected mission needs at runtime, persisted as JSON
/// between the calibrate and run/batch stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub detector: DetectorConfig,
    pub delta: DeltaProfile,
    /// Calibrated detection window (s).
    pub window_s: f64,
    pub lqr: LqrGain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationOptions {
    /// Attack-free runs feeding threshold estimation.
    pub benign_runs: usize,
    /// Stealthy-attack runs feeding window sizing.
    pub window_runs: usize,
    /// GPS bias (m) used for the window ensemble; must sit below the
    /// instant threshold so only the accumulator can catch it. Zero
    /// selects the midpoint between the calibrated drift and instant
    /// threshold of the GPS x channel.
    pub stealth_bias_m: f64,
    /// Safety margin applied to the worst observed detection time.
    pub window_margin: f64,
    /// Onset of the window-ensemble attack (s).
    pub attack_onset: f64,
    pub delta_k: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            benign_runs: 15,
            window_runs: 20,
            stealth_bias_m: 0.0,
            window_margin: 0.1,
            attack_onset: 8.0,
            delta_k: 3.0,
        }
    }
}

/// Derive the i-th ensemble variant of a mission template: fresh
/// sensor-noise and wind seeds, same geometry.
pub fn ensemble_variant(template: &MissionConfig, i: u64) -> MissionConfig {
    let mut m = template.clone();
    m.seed = template.seed.wrapping_add(i.wrapping_mul(0x9e37_79b9));
    m.wind.seed = template.wind.seed.wrapping_add(i.wrapping_mul(0x85eb_ca6b));
    m
}

/// Run the full calibration pipeline off a mission template.
pub fn calibrate(template: &MissionConfig, opts: &CalibrationOptions) -> Result<Calibration> {
    template.validate()?;
    let dt = template.dt();

    // --- attack-free ensemble: residual + error streams ---
    let benign: Vec<_> = (0..opts.benign_runs as u64)
        .into_par_iter()
        .map(|i| {
            let m = ensemble_variant(template, i);
            run_mission(MissionSetup {
                mission: &m,
                guard: None,
                attacks: vec![],
                collect_streams: true,
            })
        })
        .collect::<Result<_>>()?;

    let residual_traces: Vec<_> = benign.iter().map(|log| log.residuals.clone()).collect();
    let error_traces: Vec<_> = benign.iter().map(|log| log.base_errors.clone()).collect();
    let detector = calibrate_detector(&residual_traces)?;
    let delta = calibrate_delta(&error_traces, opts.delta_k)?;

    // --- stealthy GPS ensemble: time to detection ---
    let onset = opts.attack_onset;
    let stealth_bias = if opts.stealth_bias_m > 0.0 {
        opts.stealth_bias_m
    } else {
        0.5 * (detector.drift[idx::X] + detector.tau_inst[idx::X])
    };
    let ttd: Vec<Option<f64>> = (0..opts.window_runs as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let m = ensemble_variant(template, 1000 + i);
            let spec = AttackSpec::new(
                [(SensorId::Gps, stealth_bias)],
                [0.0, 0.0, 0.0],
                200.0,
                (onset, f64::INFINITY),
                StealthProfile::Persistent,
                4242 + i,
            )?;
            let log = run_mission(MissionSetup {
                mission: &m,
                guard: None,
                attacks: vec![spec],
                collect_streams: true,
            })?;
            // replay the freshly calibrated detector over the stream
            let mut det = DetectorState::default();
            for (k, r) in log.residuals.iter().enumerate() {
                let t = k as f64 * dt;
                if detect_step(&mut det, &detector, r, t) && t >= onset {
                    return Ok(Some(t - onset));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    // floor: instant detections would otherwise shrink the recorder
    // window to nothing
    let window_s = calibrate_window_size(&ttd, opts.window_margin)?.max(0.5);

    let lqr = lqr_gain(template.kind, &template.params, dt)?;

    Ok(Calibration {
        detector,
        delta,
        window_s,
        lqr,
    })
}

/// Recovery policy knobs that pair with a calibration to form the
/// runtime guard.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryOptions {
    pub worst_case: bool,
    pub latch_count: usize,
    pub diag_timeout: f64,
    pub clear_hold: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            worst_case: false,
            latch_count: 4,
            diag_timeout: 2.0,
            clear_hold: 1.0,
        }
    }
}

impl Calibration {
    pub fn guard(&self, dt: f64, recovery: &RecoveryOptions) -> GuardConfig {
        GuardConfig {
            detector: self.detector.clone(),
            delta: self.delta.clone(),
            window_steps: (self.window_s / dt).ceil() as u64,
            lqr: self.lqr.clone(),
            latch_count: recovery.latch_count,
            diag_timeout: recovery.diag_timeout,
            clear_hold: recovery.clear_hold,
            worst_case_override: recovery.worst_case,
        }
    }
}
