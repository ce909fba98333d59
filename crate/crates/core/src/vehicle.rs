//! Continuous-time vehicle models and the fixed-step integrator.
//!
//! Two nonlinear models are provided: a quadcopter (12 dynamic states)
//! and a kinematic ground rover. Both are advanced with classic RK4 at
//! the control-loop step. Wind enters the quadcopter as an additive
//! force proportional to the relative air velocity.

use crate::error::{Error, Result};
use crate::state::{idx, StateVector};
use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Blowup guard for the integrator.
pub const BLOWUP_LIMIT: f64 = 1e9;

/// Largest admissible integrator step (control-loop rate).
pub const MAX_DT: f64 = 0.01;

/// World-frame magnetic reference field (Gauss).
pub const MAG_WORLD: [f64; 3] = [0.22, 0.05, -0.42];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Quad,
    Rover,
}

/// Actuator command. Thrust in N, torques in N·m, acceleration in
/// m/s², steering in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlInput {
    Quad {
        thrust: f64,
        torque_roll: f64,
        torque_pitch: f64,
        torque_yaw: f64,
    },
    Rover {
        accel: f64,
        steer: f64,
    },
}

impl ControlInput {
    pub fn quad_zero() -> Self {
        ControlInput::Quad {
            thrust: 0.0,
            torque_roll: 0.0,
            torque_pitch: 0.0,
            torque_yaw: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        match *self {
            ControlInput::Quad {
                thrust,
                torque_roll,
                torque_pitch,
                torque_yaw,
            } => [thrust, torque_roll, torque_pitch, torque_yaw],
            ControlInput::Rover { accel, steer } => [accel, steer, 0.0, 0.0],
        }
    }

    pub fn from_array(kind: VehicleKind, a: &[f64; 4]) -> Self {
        match kind {
            VehicleKind::Quad => ControlInput::Quad {
                thrust: a[0],
                torque_roll: a[1],
                torque_pitch: a[2],
                torque_yaw: a[3],
            },
            VehicleKind::Rover => ControlInput::Rover {
                accel: a[0],
                steer: a[1],
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Number of actuator channels for the vehicle kind.
    pub fn dim(kind: VehicleKind) -> usize {
        match kind {
            VehicleKind::Quad => 4,
            VehicleKind::Rover => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleParams {
    pub mass: f64,
    pub gravity: f64,
    pub inertia_x: f64,
    pub inertia_y: f64,
    pub inertia_z: f64,
    /// Rover: center of mass to front axle (m).
    pub axle_front: f64,
    /// Rover: center of mass to rear axle (m).
    pub axle_rear: f64,
    /// Rover steering limit (rad).
    pub max_steer: f64,
    /// Linear drag coefficient coupling relative air velocity to force (kg/s).
    pub drag_coeff: f64,
    /// Quad: coupling from horizontal relative wind to roll/pitch torque (N·m·s/m).
    #[serde(default = "default_wind_torque_coeff")]
    pub wind_torque_coeff: f64,
}

fn default_wind_torque_coeff() -> f64 {
    0.005
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 1.5,
            gravity: 9.81,
            inertia_x: 0.03,
            inertia_y: 0.03,
            inertia_z: 0.06,
            axle_front: 0.2,
            axle_rear: 0.2,
            max_steer: 0.6,
            drag_coeff: 0.3,
            wind_torque_coeff: 0.005,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.mass,
            self.gravity,
            self.inertia_x,
            self.inertia_y,
            self.inertia_z,
            self.axle_front,
            self.axle_rear,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(
                "vehicle params must be strictly positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Body-frame magnetic field for the given Euler angles.
pub fn body_mag_field(roll: f64, pitch: f64, yaw: f64) -> [f64; 3] {
    let r = Rotation3::from_euler_angles(roll, pitch, yaw);
    let m = r.transpose() * Vector3::new(MAG_WORLD[0], MAG_WORLD[1], MAG_WORLD[2]);
    [m.x, m.y, m.z]
}

/// Quadcopter state derivative.
///
/// Twelve dynamic equations: position/velocity, Euler angles/rates,
/// torque-driven angular accelerations with gyroscopic coupling. Wind
/// adds `drag_coeff/m * (wind - v)` to the translational acceleration.
pub fn quad_derivatives(
    state: &StateVector,
    u: &ControlInput,
    p: &VehicleParams,
    wind: [f64; 3],
) -> Result<StateVector> {
    if !state.is_finite() || !u.is_finite() || wind.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quad_derivatives input"));
    }
    p.validate()?;
    let (thrust, t_roll, t_pitch, t_yaw) = match *u {
        ControlInput::Quad {
            thrust,
            torque_roll,
            torque_pitch,
            torque_yaw,
        } => (thrust, torque_roll, torque_pitch, torque_yaw),
        ControlInput::Rover { .. } => {
            return Err(Error::Domain("rover control fed to quad model".into()))
        }
    };

    let phi = state[idx::ROLL];
    let theta = state[idx::PITCH];
    let psi = state[idx::YAW];
    let (wr, wp, wy) = (state[idx::WROLL], state[idx::WPITCH], state[idx::WYAW]);

    let ut_m = thrust / p.mass;
    let k = p.drag_coeff / p.mass;
    let ax = ut_m * (phi.cos() * theta.sin() * psi.cos() + phi.sin() * psi.sin())
        + k * (wind[0] - state[idx::VX]);
    let ay = ut_m * (phi.cos() * theta.sin() * psi.sin() - phi.sin() * psi.cos())
        + k * (wind[1] - state[idx::VY]);
    let az = ut_m * phi.cos() * theta.cos() - p.gravity + k * (wind[2] - state[idx::VZ]);

    // horizontal wind also loads the airframe asymmetrically, producing
    // roll/pitch torque about the body axes (yaw-rotated frame)
    let wind_bx = wind[0] * psi.cos() + wind[1] * psi.sin();
    let wind_by = -wind[0] * psi.sin() + wind[1] * psi.cos();
    let tau_wx = p.wind_torque_coeff * wind_by;
    let tau_wy = -p.wind_torque_coeff * wind_bx;

    let dwr =
        (t_roll + tau_wx) / p.inertia_x + wp * wy * (p.inertia_y - p.inertia_z) / p.inertia_x;
    let dwp =
        (t_pitch + tau_wy) / p.inertia_y + wr * wy * (p.inertia_z - p.inertia_x) / p.inertia_y;
    let dwy = t_yaw / p.inertia_z + wr * wp * (p.inertia_x - p.inertia_y) / p.inertia_z;

    let mut d = StateVector::zeros();
    d[idx::X] = state[idx::VX];
    d[idx::Y] = state[idx::VY];
    d[idx::Z] = state[idx::VZ];
    d[idx::VX] = ax;
    d[idx::VY] = ay;
    d[idx::VZ] = az;
    d[idx::ROLL] = wr;
    d[idx::PITCH] = wp;
    d[idx::YAW] = wy;
    d[idx::WROLL] = dwr;
    d[idx::WPITCH] = dwp;
    d[idx::WYAW] = dwy;
    d[idx::ALT] = state[idx::VZ];
    Ok(d)
}

/// Slip angle of the kinematic bicycle model.
pub fn rover_slip_angle(steer: f64, p: &VehicleParams) -> f64 {
    (p.axle_rear / (p.axle_front + p.axle_rear) * steer.tan()).atan()
}

/// Ground rover (kinematic bicycle) state derivative.
pub fn rover_derivatives(
    state: &StateVector,
    u: &ControlInput,
    p: &VehicleParams,
) -> Result<StateVector> {
    if !state.is_finite() || !u.is_finite() {
        return Err(Error::NonFinite("rover_derivatives input"));
    }
    p.validate()?;
    let (accel, steer) = match *u {
        ControlInput::Rover { accel, steer } => (accel, steer),
        ControlInput::Quad { .. } => {
            return Err(Error::Domain("quad control fed to rover model".into()))
        }
    };
    if (steer.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12
        || steer.abs() > std::f64::consts::FRAC_PI_2
    {
        return Err(Error::Domain("steering angle at tan singularity".into()));
    }

    let beta = rover_slip_angle(steer, p);
    let psi = state[idx::YAW];
    let v = (state[idx::VX].powi(2) + state[idx::VY].powi(2)).sqrt();
    let heading = psi + beta;
    let dpsi = v / p.axle_rear * beta.sin();

    let mut d = StateVector::zeros();
    d[idx::X] = v * heading.cos();
    d[idx::Y] = v * heading.sin();
    // Chain rule of vx = v cos(psi+beta), vy = v sin(psi+beta).
    d[idx::VX] = accel * heading.cos() - v * heading.sin() * dpsi;
    d[idx::VY] = accel * heading.sin() + v * heading.cos() * dpsi;
    d[idx::YAW] = dpsi;
    Ok(d)
}

pub fn derivatives(
    kind: VehicleKind,
    state: &StateVector,
    u: &ControlInput,
    p: &VehicleParams,
    wind: [f64; 3],
) -> Result<StateVector> {
    match kind {
        VehicleKind::Quad => quad_derivatives(state, u, p, wind),
        VehicleKind::Rover => rover_derivatives(state, u, p),
    }
}

/// One RK4 step of the vehicle model.
///
/// After integration the derived components are refreshed: the
/// acceleration states take the derivative evaluated at the new state,
/// the magnetic field states the body-frame reference field at the new
/// attitude, and the barometric altitude the new z.
pub fn step(
    kind: VehicleKind,
    state: &StateVector,
    u: &ControlInput,
    p: &VehicleParams,
    wind: [f64; 3],
    dt: f64,
) -> Result<StateVector> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Domain(format!("dt {dt} outside (0, {MAX_DT}]")));
    }
    let k1 = derivatives(kind, state, u, p, wind)?;
    let k2 = derivatives(kind, &(*state + k1 * (dt / 2.0)), u, p, wind)?;
    let k3 = derivatives(kind, &(*state + k2 * (dt / 2.0)), u, p, wind)?;
    let k4 = derivatives(kind, &(*state + k3 * dt), u, p, wind)?;
    let mut next = *state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    next.wrap_angles();

    let d_end = derivatives(kind, &next, u, p, wind)?;
    next[idx::AX] = d_end[idx::VX];
    next[idx::AY] = d_end[idx::VY];
    next[idx::AZ] = d_end[idx::VZ];
    let m = body_mag_field(next[idx::ROLL], next[idx::PITCH], next[idx::YAW]);
    next[idx::MX] = m[0];
    next[idx::MY] = m[1];
    next[idx::MZ] = m[2];
    next[idx::ALT] = next[idx::Z];

    if next.max_abs() > BLOWUP_LIMIT {
        return Err(Error::SimulationBlowup(BLOWUP_LIMIT));
    }
    Ok(next)
}

/// A hover-equilibrium state with derived components populated.
pub fn hover_state(_p: &VehicleParams, position: [f64; 3]) -> StateVector {
    let mut s = StateVector::zeros();
    s[idx::X] = position[0];
    s[idx::Y] = position[1];
    s[idx::Z] = position[2];
    s[idx::ALT] = position[2];
    let m = body_mag_field(0.0, 0.0, 0.0);
    s[idx::MX] = m[0];
    s[idx::MY] = m[1];
    s[idx::MZ] = m[2];
    s
}

/// Wind configuration: constant mean flow plus first-order low-pass
/// filtered Gaussian gusts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindField {
    /// Mean speed in m/s, valid range [0, 10].
    pub mean_speed: f64,
    /// Mean flow direction (rad, world frame, horizontal).
    pub direction: f64,
    /// Gust standard deviation (m/s).
    pub gust_amp: f64,
    /// Gust correlation time (s).
    pub gust_tau: f64,
    pub seed: u64,
}

impl Default for WindField {
    fn default() -> Self {
        WindField {
            mean_speed: 0.0,
            direction: 0.0,
            gust_amp: 0.0,
            gust_tau: 2.0,
            seed: 0,
        }
    }
}

impl WindField {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=10.0).contains(&self.mean_speed) {
            return Err(Error::Domain(format!(
                "wind mean speed {} outside [0, 10] m/s",
                self.mean_speed
            )));
        }
        if self.gust_amp < 0.0 || self.gust_tau <= 0.0 {
            return Err(Error::Domain("gust amplitude/correlation invalid".into()));
        }
        Ok(())
    }

    pub fn mean_vector(&self) -> [f64; 3] {
        [
            self.mean_speed * self.direction.cos(),
            self.mean_speed * self.direction.sin(),
            0.0,
        ]
    }
}

/// Stateful gust generator: per-axis Ornstein-Uhlenbeck process,
/// deterministic given the seed.
#[derive(Debug, Clone)]
pub struct WindModel {
    field: WindField,
    gust: [f64; 3],
    rng: ChaCha8Rng,
}

impl WindModel {
    pub fn new(field: WindField) -> Result<Self> {
        field.validate()?;
        Ok(WindModel {
            field,
            gust: [0.0; 3],
            rng: ChaCha8Rng::seed_from_u64(field.seed),
        })
    }

    /// Advance the gust process and return the total wind velocity.
    pub fn step(&mut self, dt: f64) -> [f64; 3] {
        let decay = (-dt / self.field.gust_tau).exp();
        let diffuse = self.field.gust_amp * (1.0 - decay * decay).sqrt();
        let mean = self.field.mean_vector();
        let mut w = [0.0; 3];
        for axis in 0..3 {
            // Box-Muller from two uniforms keeps the stream layout fixed.
            let u1: f64 = self.rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = self.rng.gen_range(0.0..1.0);
            let n = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            self.gust[axis] = self.gust[axis] * decay + diffuse * n;
            w[axis] = mean[axis] + self.gust[axis];
        }
        w
    }

    pub fn mean(&self) -> [f64; 3] {
        self.field.mean_vector()
    }
}
