//! Flight control: a cascaded proportional controller for nominal
//! tracking and an LQR regulator used during recovery, when estimate
//! quality is degraded and a conservative, provably stabilizing law
//! is preferred.

use crate::error::{Error, Result};
use crate::state::{idx, wrap_angle, StateVector};
use crate::vehicle::{self, ControlInput, VehicleKind, VehicleParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Cascade gains and saturation limits for the nominal controller.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CascadeGains {
    pub kp_pos: f64,
    pub kp_vel: f64,
    pub kp_att: f64,
    pub kp_rate: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub tilt_max: f64,
    pub rate_max: f64,
    // rover loop
    pub kp_heading: f64,
    pub kp_speed: f64,
    pub cruise_speed: f64,
    pub accel_max: f64,
}

impl Default for CascadeGains {
    fn default() -> Self {
        CascadeGains {
            kp_pos: 0.7,
            kp_vel: 2.0,
            kp_att: 6.0,
            kp_rate: 20.0,
            v_max: 5.0,
            a_max: 4.0,
            tilt_max: 0.5,
            rate_max: 3.0,
            kp_heading: 2.0,
            kp_speed: 1.5,
            cruise_speed: 2.0,
            accel_max: 3.0,
        }
    }
}

fn clamp(v: f64, lim: f64) -> f64 {
    v.clamp(-lim, lim)
}

/// Nominal waypoint-tracking controller.
///
/// Quad: position -> velocity -> attitude -> body-rate proportional
/// cascade with per-stage saturation; thrust compensates tilt.
/// Rover: proportional heading steer plus proportional speed hold.
#[derive(Debug, Clone)]
pub struct CascadeController {
    pub kind: VehicleKind,
    pub params: VehicleParams,
    pub gains: CascadeGains,
    pub yaw_target: f64,
}

impl CascadeController {
    pub fn new(kind: VehicleKind, params: VehicleParams) -> Self {
        CascadeController {
            kind,
            params,
            gains: CascadeGains::default(),
            yaw_target: 0.0,
        }
    }

    pub fn control(&self, est: &StateVector, waypoint: [f64; 3]) -> ControlInput {
        match self.kind {
            VehicleKind::Quad => self.quad_control(est, waypoint),
            VehicleKind::Rover => self.rover_control(est, waypoint),
        }
    }

    /// Conservative station-keeping command: level the attitude and
    /// hold hover thrust (quad) or brake to a stop (rover). Used while
    /// the position estimate is in question and chasing it would be
    /// dangerous.
    pub fn hold(&self, s: &StateVector) -> ControlInput {
        match self.kind {
            VehicleKind::Quad => {
                let g = &self.gains;
                let p = &self.params;
                let rate_des = [
                    clamp(g.kp_att * wrap_angle(-s[idx::ROLL]), g.rate_max),
                    clamp(g.kp_att * wrap_angle(-s[idx::PITCH]), g.rate_max),
                    clamp(g.kp_att * wrap_angle(self.yaw_target - s[idx::YAW]), g.rate_max),
                ];
                let tilt_cos = (s[idx::ROLL].cos() * s[idx::PITCH].cos()).max(0.5);
                ControlInput::Quad {
                    thrust: (p.hover_thrust() / tilt_cos).clamp(0.0, 4.0 * p.hover_thrust()),
                    torque_roll: clamp(
                        p.inertia_x * g.kp_rate * (rate_des[0] - s[idx::WROLL]),
                        2.0,
                    ),
                    torque_pitch: clamp(
                        p.inertia_y * g.kp_rate * (rate_des[1] - s[idx::WPITCH]),
                        2.0,
                    ),
                    torque_yaw: clamp(
                        p.inertia_z * g.kp_rate * (rate_des[2] - s[idx::WYAW]),
                        2.0,
                    ),
                }
            }
            VehicleKind::Rover => {
                let g = &self.gains;
                let v = s[idx::VX].hypot(s[idx::VY]);
                ControlInput::Rover {
                    accel: clamp(-g.kp_speed * v, g.accel_max),
                    steer: 0.0,
                }
            }
        }
    }

    fn quad_control(&self, s: &StateVector, wp: [f64; 3]) -> ControlInput {
        let g = &self.gains;
        let p = &self.params;

        let v_des = [
            clamp(g.kp_pos * (wp[0] - s[idx::X]), g.v_max),
            clamp(g.kp_pos * (wp[1] - s[idx::Y]), g.v_max),
            clamp(g.kp_pos * (wp[2] - s[idx::Z]), g.v_max),
        ];
        let a_des = [
            clamp(g.kp_vel * (v_des[0] - s[idx::VX]), g.a_max),
            clamp(g.kp_vel * (v_des[1] - s[idx::VY]), g.a_max),
            clamp(g.kp_vel * (v_des[2] - s[idx::VZ]), g.a_max),
        ];

        // Small-angle inversion of the translational dynamics: desired
        // horizontal acceleration maps to pitch/roll in the yawed frame.
        let psi = s[idx::YAW];
        let gr = p.gravity;
        let pitch_des = clamp((a_des[0] * psi.cos() + a_des[1] * psi.sin()) / gr, g.tilt_max);
        let roll_des = clamp((a_des[0] * psi.sin() - a_des[1] * psi.cos()) / gr, g.tilt_max);

        let rate_des = [
            clamp(g.kp_att * wrap_angle(roll_des - s[idx::ROLL]), g.rate_max),
            clamp(g.kp_att * wrap_angle(pitch_des - s[idx::PITCH]), g.rate_max),
            clamp(g.kp_att * wrap_angle(self.yaw_target - s[idx::YAW]), g.rate_max),
        ];

        let torque_roll = p.inertia_x * g.kp_rate * (rate_des[0] - s[idx::WROLL]);
        let torque_pitch = p.inertia_y * g.kp_rate * (rate_des[1] - s[idx::WPITCH]);
        let torque_yaw = p.inertia_z * g.kp_rate * (rate_des[2] - s[idx::WYAW]);

        let tilt_cos = (s[idx::ROLL].cos() * s[idx::PITCH].cos()).max(0.5);
        let thrust = (p.mass * (gr + a_des[2]) / tilt_cos).clamp(0.0, 4.0 * p.hover_thrust());

        ControlInput::Quad {
            thrust,
            torque_roll: clamp(torque_roll, 2.0),
            torque_pitch: clamp(torque_pitch, 2.0),
            torque_yaw: clamp(torque_yaw, 2.0),
        }
    }

    fn rover_control(&self, s: &StateVector, wp: [f64; 3]) -> ControlInput {
        let g = &self.gains;
        let dx = wp[0] - s[idx::X];
        let dy = wp[1] - s[idx::Y];
        let dist = dx.hypot(dy);
        let heading_des = dy.atan2(dx);
        let steer = clamp(
            g.kp_heading * wrap_angle(heading_des - s[idx::YAW]),
            self.params.max_steer,
        );
        // slow down on approach so the waypoint is not orbited
        let v_des = g.cruise_speed.min(0.8 * dist);
        let v = s[idx::VX].hypot(s[idx::VY]);
        let accel = clamp(g.kp_speed * (v_des - v), g.accel_max);
        ControlInput::Rover { accel, steer }
    }
}

/// Indices of the dynamic states the regulator acts on. Derived
/// states (accelerations, magnetometer, altimeter) are algebraic and
/// excluded; for the rover the vertical/attitude channels have no
/// dynamics at all.
pub fn regulated_indices(kind: VehicleKind) -> &'static [usize] {
    match kind {
        VehicleKind::Quad => &[
            idx::X,
            idx::Y,
            idx::Z,
            idx::VX,
            idx::VY,
            idx::VZ,
            idx::ROLL,
            idx::PITCH,
            idx::YAW,
            idx::WROLL,
            idx::WPITCH,
            idx::WYAW,
        ],
        // vy is slaved to yaw at cruise (vy ~ v * yaw), so penalizing
        // it separately creates an uncontrollable marginal mode.
        VehicleKind::Rover => &[idx::X, idx::Y, idx::VX, idx::YAW],
    }
}

fn trim_point(kind: VehicleKind, p: &VehicleParams) -> (StateVector, ControlInput) {
    match kind {
        VehicleKind::Quad => (
            vehicle::hover_state(p, [0.0, 0.0, 0.0]),
            ControlInput::Quad {
                thrust: p.hover_thrust(),
                torque_roll: 0.0,
                torque_pitch: 0.0,
                torque_yaw: 0.0,
            },
        ),
        VehicleKind::Rover => {
            let mut s = vehicle::hover_state(p, [0.0, 0.0, 0.0]);
            s[idx::VX] = 2.0; // straight-line cruise
            (s, ControlInput::Rover { accel: 0.0, steer: 0.0 })
        }
    }
}

fn signed_diff(a: &StateVector, b: &StateVector, i: usize) -> f64 {
    if crate::state::is_angle_index(i) {
        wrap_angle(a.0[i] - b.0[i])
    } else {
        a.0[i] - b.0[i]
    }
}

/// Discrete linearization (A, B) of one integration step about the
/// trim point, restricted to the regulated states, by central finite
/// differences in still air.
pub fn linearize(
    kind: VehicleKind,
    p: &VehicleParams,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (x0, u0) = trim_point(kind, p);
    let sel = regulated_indices(kind);
    let n = sel.len();
    let m = ControlInput::dim(kind);
    let wind = [0.0; 3];
    let u0a = u0.as_array();

    let mut a = DMatrix::zeros(n, n);
    for (j, &sj) in sel.iter().enumerate() {
        let h = 1e-5 * x0[sj].abs().max(1.0);
        let mut xp = x0;
        let mut xm = x0;
        xp[sj] += h;
        xm[sj] -= h;
        let fp = vehicle::step(kind, &xp, &u0, p, wind, dt)?;
        let fm = vehicle::step(kind, &xm, &u0, p, wind, dt)?;
        for (i, &si) in sel.iter().enumerate() {
            a[(i, j)] = signed_diff(&fp, &fm, si) / (2.0 * h);
        }
    }

    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        let h = 1e-5 * u0a[j].abs().max(1.0);
        let mut up = u0a;
        let mut um = u0a;
        up[j] += h;
        um[j] -= h;
        let fp = vehicle::step(kind, &x0, &ControlInput::from_array(kind, &up), p, wind, dt)?;
        let fm = vehicle::step(kind, &x0, &ControlInput::from_array(kind, &um), p, wind, dt)?;
        for (i, &si) in sel.iter().enumerate() {
            b[(i, j)] = signed_diff(&fp, &fm, si) / (2.0 * h);
        }
    }
    Ok((a, b))
}

/// Fixed-point solution of the discrete algebraic Riccati equation
/// P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA, iterated from P = Q.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    let max_iters = 100_000;
    for _ in 0..max_iters {
        let btp = b.transpose() * &p;
        let s = r + &btp * b;
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalDegeneracy("singular R + B'PB".into()))?;
        let atp = a.transpose() * &p;
        let next = q + &atp * a - &atp * b * s_inv * &btp * a;
        let diff = (&next - &p).abs().max();
        p = next;
        // enforce symmetry lost to round-off
        p = ((&p + p.transpose()) * 0.5).clone_owned();
        if !p.iter().all(|v| v.is_finite()) || p.abs().max() > 1e12 {
            return Err(Error::NonStabilizable);
        }
        if diff < 1e-10 {
            return Ok(p);
        }
    }
    Err(Error::NonStabilizable)
}

/// State-feedback recovery law, precomputed at calibration time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LqrGain {
    pub kind: VehicleKind,
    pub k: DMatrix<f64>,
    pub trim_state: Vec<f64>,
    pub trim_control: [f64; 4],
    /// Maximum position error fed to the regulator (m); larger errors
    /// are clamped so distant targets do not saturate every actuator.
    pub pos_err_clamp: f64,
}

/// Synthesize the recovery gain for a vehicle at the control rate.
pub fn lqr_gain(kind: VehicleKind, p: &VehicleParams, dt: f64) -> Result<LqrGain> {
    let (a, b) = linearize(kind, p, dt)?;
    let sel = regulated_indices(kind);
    let n = sel.len();
    let m = ControlInput::dim(kind);

    let mut q = DMatrix::zeros(n, n);
    for (i, &si) in sel.iter().enumerate() {
        q[(i, i)] = match si {
            idx::X | idx::Y | idx::Z => 10.0,
            idx::ROLL | idx::PITCH | idx::YAW => 5.0,
            _ => 1.0,
        };
    }
    // torque/steer channels are penalized hard: recovery flies on a
    // degraded estimate and must stay docile
    let mut r = DMatrix::identity(m, m);
    match kind {
        VehicleKind::Quad => {
            for j in 1..4 {
                r[(j, j)] = 50.0;
            }
        }
        VehicleKind::Rover => {
            r[(1, 1)] = 10.0;
        }
    }
    let pmat = solve_dare(&a, &b, &q, &r)?;

    let btp = b.transpose() * &pmat;
    let s = &r + &btp * &b;
    let k = s
        .try_inverse()
        .ok_or_else(|| Error::NumericalDegeneracy("singular R + B'PB".into()))?
        * btp
        * &a;

    let (x0, u0) = trim_point(kind, p);
    Ok(LqrGain {
        kind,
        k,
        trim_state: sel.iter().map(|&i| x0[i]).collect(),
        trim_control: u0.as_array(),
        pos_err_clamp: 3.0,
    })
}

impl LqrGain {
    /// u = trim - K (x - target) on the regulated states, with wrapped
    /// angle errors, clamped position errors, and actuator saturation.
    pub fn control(
        &self,
        est: &StateVector,
        target: [f64; 3],
        p: &VehicleParams,
    ) -> ControlInput {
        let sel = regulated_indices(self.kind);
        let mut err = DVector::zeros(sel.len());
        for (i, &si) in sel.iter().enumerate() {
            let reference = match si {
                idx::X => target[0],
                idx::Y => target[1],
                idx::Z => target[2],
                _ => self.trim_state[i],
            };
            let mut e = est.0[si] - reference;
            if crate::state::is_angle_index(si) {
                e = wrap_angle(e);
            }
            if matches!(si, idx::X | idx::Y | idx::Z) {
                e = clamp(e, self.pos_err_clamp);
            }
            err[i] = e;
        }
        let du = &self.k * err;
        let mut u = self.trim_control;
        for (j, uj) in u.iter_mut().enumerate().take(du.len()) {
            *uj -= du[j];
        }
        match self.kind {
            VehicleKind::Quad => ControlInput::Quad {
                thrust: u[0].clamp(0.0, 4.0 * p.hover_thrust()),
                torque_roll: clamp(u[1], 2.0),
                torque_pitch: clamp(u[2], 2.0),
                torque_yaw: clamp(u[3], 2.0),
            },
            VehicleKind::Rover => ControlInput::Rover {
                accel: clamp(u[0], 3.0),
                steer: clamp(u[1], p.max_steer),
            },
        }
    }
}
