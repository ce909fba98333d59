//! Physical state vector shared by every subsystem.
//!
//! The stored state has 19 components: position (m), velocity (m/s),
//! acceleration (m/s²), Euler angles (rad), angular rates (rad/s),
//! body-frame magnetic field (Gauss), and barometric altitude (m).
//! Angles are radians internally; degrees appear only at config/CSV
//! boundaries.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// Number of stored state components.
pub const STATE_DIM: usize = 19;

/// Component indices into a [`StateVector`].
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const VZ: usize = 5;
    pub const AX: usize = 6;
    pub const AY: usize = 7;
    pub const AZ: usize = 8;
    pub const ROLL: usize = 9;
    pub const PITCH: usize = 10;
    pub const YAW: usize = 11;
    pub const WROLL: usize = 12;
    pub const WPITCH: usize = 13;
    pub const WYAW: usize = 14;
    pub const MX: usize = 15;
    pub const MY: usize = 16;
    pub const MZ: usize = 17;
    pub const ALT: usize = 18;
}

/// Indices that are angular and must use wrapped distance.
pub const ANGLE_INDICES: [usize; 3] = [idx::ROLL, idx::PITCH, idx::YAW];

pub fn is_angle_index(i: usize) -> bool {
    i == idx::ROLL || i == idx::PITCH || i == idx::YAW
}

/// Short per-component labels, used in trace CSV headers and reports.
pub const COMPONENT_NAMES: [&str; STATE_DIM] = [
    "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az", "roll", "pitch", "yaw", "wroll", "wpitch",
    "wyaw", "mx", "my", "mz", "alt",
];

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Shortest angular distance |a - b| on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// The 19-component physical state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl Default for StateVector {
    fn default() -> Self {
        StateVector([0.0; STATE_DIM])
    }
}

impl StateVector {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn position(&self) -> [f64; 3] {
        [self.0[idx::X], self.0[idx::Y], self.0[idx::Z]]
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.0[idx::VX], self.0[idx::VY], self.0[idx::VZ]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Re-wrap the Euler angle components to (-pi, pi].
    pub fn wrap_angles(&mut self) {
        for i in ANGLE_INDICES {
            self.0[i] = wrap_angle(self.0[i]);
        }
    }

    /// Largest absolute component, used for blowup checks.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Per-component distance, wrapped on angle channels.
    pub fn component_distance(&self, other: &StateVector, i: usize) -> f64 {
        if is_angle_index(i) {
            angle_distance(self.0[i], other.0[i])
        } else {
            (self.0[i] - other.0[i]).abs()
        }
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(self, rhs: StateVector) -> StateVector {
        let mut out = self;
        for i in 0..STATE_DIM {
            out.0[i] += rhs.0[i];
        }
        out
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(self, rhs: StateVector) -> StateVector {
        let mut out = self;
        for i in 0..STATE_DIM {
            out.0[i] -= rhs.0[i];
        }
        out
    }
}

impl Mul<f64> for StateVector {
    type Output = StateVector;
    fn mul(self, k: f64) -> StateVector {
        let mut out = self;
        for v in out.0.iter_mut() {
            *v *= k;
        }
        out
    }
}
