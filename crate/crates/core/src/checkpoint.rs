//! Windowed historic-state recording and post-diagnosis state
//! reconstruction.
//!
//! The recorder keeps two sliding windows: the committed window, whose
//! opening state has survived a full detection window without an
//! alert, and the in-progress window still under scrutiny. On alert
//! the in-progress window is discarded and the committed window's
//! opening state anchors the roll-forward; the control inputs logged
//! since that anchor replay the physics to the present.

use crate::diagnose::DiagnosisResult;
use crate::ekf::{roll_forward, EkfModel};
use crate::error::{Error, Result};
use crate::sensing::{states_for_sensor, SensorFrame};
use crate::state::{StateVector, STATE_DIM};
use crate::vehicle::ControlInput;
use serde::{Deserialize, Serialize};

/// A snapshot trusted to predate any undetected corruption.
#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub state: StateVector,
    pub t: f64,
    pub step: u64,
}

/// Double-buffered historic state recorder.
///
/// `window_steps` equals the calibrated detection window converted to
/// control steps. A window's opening snapshot is only trusted
/// (committed) once a full further window has elapsed alert-free.
#[derive(Debug, Clone)]
pub struct HistoryWindow {
    pub window_steps: u64,
    committed: Option<Anchor>,
    pending: Option<Anchor>,
    /// Controls applied since the committed anchor, oldest first.
    controls: Vec<ControlInput>,
    /// Controls applied since the pending anchor.
    pending_controls: Vec<ControlInput>,
    steps_since_pending: u64,
}

impl HistoryWindow {
    pub fn new(window_steps: u64) -> Result<Self> {
        if window_steps == 0 {
            return Err(Error::Domain("window must span at least one step".into()));
        }
        Ok(HistoryWindow {
            window_steps,
            committed: None,
            pending: None,
            controls: Vec::new(),
            pending_controls: Vec::new(),
            steps_since_pending: 0,
        })
    }

    pub fn committed(&self) -> Option<&Anchor> {
        self.committed.as_ref()
    }

    /// Record one control step. `estimate` is the filtered state at the
    /// *start* of the step, `u` the control applied over it.
    pub fn record_step(&mut self, estimate: &StateVector, u: &ControlInput, t: f64, step: u64) {
        if self.pending.is_none() {
            self.pending = Some(Anchor {
                state: *estimate,
                t,
                step,
            });
            self.steps_since_pending = 0;
            self.pending_controls.clear();
        }
        self.controls.push(*u);
        self.pending_controls.push(*u);
        self.steps_since_pending += 1;

        if self.steps_since_pending >= self.window_steps {
            // The pending anchor survived a full window: promote it and
            // drop the previously committed snapshot.
            self.committed = self.pending.take();
            self.controls = std::mem::take(&mut self.pending_controls);
            self.steps_since_pending = 0;
        }
    }

    /// Drop the window still under scrutiny (called on alert); the
    /// committed anchor is retained as the recovery source.
    pub fn discard_pending(&mut self) {
        self.pending = None;
        self.pending_controls.clear();
        self.steps_since_pending = 0;
    }

    /// Restart recording after recovery completes: both buffers are
    /// invalidated since the estimate lineage was rebuilt.
    pub fn restart(&mut self) {
        self.committed = None;
        self.pending = None;
        self.controls.clear();
        self.pending_controls.clear();
        self.steps_since_pending = 0;
    }

    /// Replay the logged controls from the committed anchor to the
    /// present through the dynamics model.
    pub fn roll_forward_committed(&self, model: &EkfModel, dt: f64) -> Result<StateVector> {
        let anchor = self.committed.as_ref().ok_or(Error::NoSafeHistory)?;
        roll_forward(model, &anchor.state, &self.controls, dt)
    }

    pub fn logged_controls(&self) -> &[ControlInput] {
        &self.controls
    }
}

/// Where each reconstructed component came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Taken from the live sensor projection (sensor not implicated).
    Live,
    /// Replayed through the dynamics from the committed anchor.
    RolledForward,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub state: StateVector,
    pub provenance: [Provenance; STATE_DIM],
}

/// Rebuild the full state after diagnosis: components fed by
/// implicated sensors come from the anchored roll-forward, the rest
/// from the current sensor frame.
pub fn reconstruct(
    history: &HistoryWindow,
    model: &EkfModel,
    diagnosis: &DiagnosisResult,
    frame: &SensorFrame,
    dt: f64,
) -> Result<Reconstruction> {
    let rolled = history.roll_forward_committed(model, dt)?;
    let live = frame.to_state();
    let mut provenance = [Provenance::Live; STATE_DIM];
    for sensor in &diagnosis.malicious_sensors {
        for &i in states_for_sensor(*sensor) {
            provenance[i] = Provenance::RolledForward;
        }
    }
    let mut state = live;
    for i in 0..STATE_DIM {
        if provenance[i] == Provenance::RolledForward {
            state[i] = rolled[i];
        }
    }
    Ok(Reconstruction { state, provenance })
}

/// Size the detection window from an ensemble of times-to-detection
/// (seconds) gathered under the slowest-detected attack profile: the
/// worst case plus a safety margin.
pub fn calibrate_window_size(times_to_detection: &[Option<f64>], margin: f64) -> Result<f64> {
    if times_to_detection.len() < 20 {
        return Err(Error::DegenerateEnsemble(format!(
            "window calibration needs >= 20 runs, got {}",
            times_to_detection.len()
        )));
    }
    let mut worst = 0.0f64;
    for t in times_to_detection {
        match t {
            // zero is legitimate: detection in the very onset step
            Some(v) if v.is_finite() && *v >= 0.0 => worst = worst.max(*v),
            _ => {
                return Err(Error::CalibrationFailure(
                    "an ensemble run went undetected; the window cannot bound it".into(),
                ))
            }
        }
    }
    Ok(worst * (1.0 + margin))
}
