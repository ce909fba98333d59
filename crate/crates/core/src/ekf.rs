//! Extended Kalman Filter over the nonlinear vehicle model.
//!
//! The transition function is one RK4 step of the vehicle dynamics
//! (with the configured mean wind); Jacobians come from central finite
//! differences of that step. Corrections accept any subset of measured
//! state components, so isolated sensors are simply left out.

use crate::error::{Error, Result};
use crate::state::{is_angle_index, wrap_angle, StateVector, STATE_DIM};
use crate::vehicle::{step, ControlInput, VehicleKind, VehicleParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Transition model context shared by predictions and roll-forward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EkfModel {
    pub kind: VehicleKind,
    pub params: VehicleParams,
    /// Mean wind assumed by the model (gusts are unmodeled).
    pub wind_mean: [f64; 3],
}

impl EkfModel {
    pub fn transition(&self, x: &StateVector, u: &ControlInput, dt: f64) -> Result<StateVector> {
        step(self.kind, x, u, &self.params, self.wind_mean, dt)
    }

    /// Central finite-difference Jacobian of the one-step transition.
    pub fn jacobian(&self, x: &StateVector, u: &ControlInput, dt: f64) -> Result<DMatrix<f64>> {
        let mut f = DMatrix::zeros(STATE_DIM, STATE_DIM);
        for j in 0..STATE_DIM {
            let h = 1e-5 * x[j].abs().max(1.0);
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let fp = self.transition(&xp, u, dt)?;
            let fm = self.transition(&xm, u, dt)?;
            for i in 0..STATE_DIM {
                let diff = if is_angle_index(i) {
                    wrap_angle(fp[i] - fm[i])
                } else {
                    fp[i] - fm[i]
                };
                f[(i, j)] = diff / (2.0 * h);
            }
        }
        Ok(f)
    }
}

/// Filter state: estimate, covariance, and noise models.
#[derive(Debug, Clone)]
pub struct EkfState {
    pub estimate: StateVector,
    pub cov: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    /// Per-component measurement noise variance.
    pub meas_noise: [f64; STATE_DIM],
    /// Kalman gain from the last correction (columns follow the
    /// measured index order of that correction).
    pub last_gain: Option<DMatrix<f64>>,
}

impl EkfState {
    pub fn new(
        estimate: StateVector,
        initial_cov: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        meas_noise: [f64; STATE_DIM],
    ) -> Self {
        EkfState {
            estimate,
            cov: initial_cov,
            process_noise,
            meas_noise,
            last_gain: None,
        }
    }

    /// Default noise bookkeeping: diagonal process noise on the
    /// kinematic states, measurement variances from the sensor sigmas.
    pub fn with_defaults(estimate: StateVector, meas_sigma: &[f64; STATE_DIM]) -> Self {
        let q = DMatrix::from_diagonal(&DVector::from_fn(STATE_DIM, |_, _| 1e-4));
        let p0 = DMatrix::from_diagonal(&DVector::from_fn(STATE_DIM, |i, _| {
            (meas_sigma[i].powi(2)).max(1e-6)
        }));
        let mut r = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            r[i] = meas_sigma[i].powi(2).max(1e-8);
        }
        EkfState::new(estimate, p0, q, r)
    }

    fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov = (&self.cov + t) * 0.5;
    }
}

/// Advance the estimate through the dynamics and propagate covariance
/// as F P Fᵀ + Q.
pub fn ekf_predict(
    model: &EkfModel,
    ekf: &mut EkfState,
    u: &ControlInput,
    dt: f64,
) -> Result<()> {
    let f = model.jacobian(&ekf.estimate, u, dt)?;
    ekf.estimate = model.transition(&ekf.estimate, u, dt)?;
    ekf.cov = &f * &ekf.cov * f.transpose() + &ekf.process_noise;
    ekf.symmetrize();
    Ok(())
}

/// Correct the estimate with measured components (index, value).
pub fn ekf_correct(ekf: &mut EkfState, measured: &[(usize, f64)]) -> Result<()> {
    if measured.is_empty() {
        return Err(Error::NumericalDegeneracy(
            "correction with empty measurement set".into(),
        ));
    }
    let m = measured.len();
    // Innovation with wrapped differences on angle channels.
    let mut innov = DVector::zeros(m);
    for (k, &(i, y)) in measured.iter().enumerate() {
        let d = y - ekf.estimate[i];
        innov[k] = if is_angle_index(i) { wrap_angle(d) } else { d };
    }
    // S = H P Hᵀ + R over the measured subset.
    let mut s = DMatrix::zeros(m, m);
    for (a, &(i, _)) in measured.iter().enumerate() {
        for (b, &(j, _)) in measured.iter().enumerate() {
            s[(a, b)] = ekf.cov[(i, j)];
        }
        s[(a, a)] += ekf.meas_noise[measured[a].0];
    }
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::NumericalDegeneracy("singular innovation covariance".into()))?;

    // K = P Hᵀ S⁻¹, built from the measured columns of P.
    let mut ph = DMatrix::zeros(STATE_DIM, m);
    for (b, &(j, _)) in measured.iter().enumerate() {
        for i in 0..STATE_DIM {
            ph[(i, b)] = ekf.cov[(i, j)];
        }
    }
    let gain = &ph * s_inv;

    let dx = &gain * innov;
    for i in 0..STATE_DIM {
        ekf.estimate[i] += dx[i];
    }
    ekf.estimate.wrap_angles();

    // P ← (I - K H) P
    let mut kh = DMatrix::zeros(STATE_DIM, STATE_DIM);
    for (b, &(j, _)) in measured.iter().enumerate() {
        for i in 0..STATE_DIM {
            kh[(i, j)] = gain[(i, b)];
        }
    }
    let ident = DMatrix::identity(STATE_DIM, STATE_DIM);
    ekf.cov = (ident - kh) * &ekf.cov;
    ekf.symmetrize();
    ekf.last_gain = Some(gain);
    Ok(())
}

/// Iterate the deterministic model from a trusted anchor using logged
/// controls; no corrections. Returns the rolled-forward state.
pub fn roll_forward(
    model: &EkfModel,
    trusted: &StateVector,
    controls: &[ControlInput],
    dt: f64,
) -> Result<StateVector> {
    let mut x = *trusted;
    for u in controls {
        x = model.transition(&x, u, dt)?;
    }
    Ok(x)
}
