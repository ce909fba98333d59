//! Five-sensor suite simulation: per-sensor sampling rates and noise,
//! the states-to-sensor mapping, and multi-rate stream alignment.

use crate::error::{Error, Result};
use crate::state::{idx, StateVector, STATE_DIM};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorId {
    Gps,
    Gyroscope,
    Accelerometer,
    Magnetometer,
    Barometer,
}

pub const ALL_SENSORS: [SensorId; 5] = [
    SensorId::Gps,
    SensorId::Gyroscope,
    SensorId::Accelerometer,
    SensorId::Magnetometer,
    SensorId::Barometer,
];

impl SensorId {
    pub fn name(&self) -> &'static str {
        match self {
            SensorId::Gps => "gps",
            SensorId::Gyroscope => "gyroscope",
            SensorId::Accelerometer => "accelerometer",
            SensorId::Magnetometer => "magnetometer",
            SensorId::Barometer => "barometer",
        }
    }

    pub fn ordinal(&self) -> usize {
        ALL_SENSORS.iter().position(|s| s == self).unwrap()
    }
}

impl std::fmt::Display for SensorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SensorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gps" => Ok(SensorId::Gps),
            "gyroscope" | "gyro" => Ok(SensorId::Gyroscope),
            "accelerometer" | "accel" => Ok(SensorId::Accelerometer),
            "magnetometer" | "mag" => Ok(SensorId::Magnetometer),
            "barometer" | "baro" => Ok(SensorId::Barometer),
            other => Err(Error::ConfigParse(format!("unknown sensor '{other}'"))),
        }
    }
}

/// State components observed by a sensor.
pub fn states_for_sensor(id: SensorId) -> &'static [usize] {
    match id {
        SensorId::Gps => &[idx::X, idx::Y, idx::Z, idx::VX, idx::VY, idx::VZ],
        SensorId::Gyroscope => &[
            idx::ROLL,
            idx::PITCH,
            idx::YAW,
            idx::WROLL,
            idx::WPITCH,
            idx::WYAW,
        ],
        SensorId::Accelerometer => &[idx::AX, idx::AY, idx::AZ],
        SensorId::Magnetometer => &[idx::MX, idx::MY, idx::MZ],
        SensorId::Barometer => &[idx::ALT],
    }
}

/// Inverse of [`states_for_sensor`].
pub fn sensor_for_state(component: usize) -> SensorId {
    for id in ALL_SENSORS {
        if states_for_sensor(id).contains(&component) {
            return id;
        }
    }
    unreachable!("component {component} outside state dimension")
}

/// Per-sensor sampling rates (Hz). The target frequency is the maximum
/// rate; every rate must divide it evenly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub gps_hz: u32,
    pub gyroscope_hz: u32,
    pub accelerometer_hz: u32,
    pub magnetometer_hz: u32,
    pub barometer_hz: u32,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            gps_hz: 100,
            gyroscope_hz: 400,
            accelerometer_hz: 400,
            magnetometer_hz: 100,
            barometer_hz: 100,
        }
    }
}

impl SamplingPlan {
    pub fn rate(&self, id: SensorId) -> u32 {
        match id {
            SensorId::Gps => self.gps_hz,
            SensorId::Gyroscope => self.gyroscope_hz,
            SensorId::Accelerometer => self.accelerometer_hz,
            SensorId::Magnetometer => self.magnetometer_hz,
            SensorId::Barometer => self.barometer_hz,
        }
    }

    /// Target frequency: the highest configured rate.
    pub fn target_hz(&self) -> u32 {
        ALL_SENSORS.iter().map(|s| self.rate(*s)).max().unwrap()
    }

    /// Lowest configured rate; every sensor refreshes on this grid.
    pub fn base_hz(&self) -> u32 {
        ALL_SENSORS.iter().map(|s| self.rate(*s)).min().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let target = self.target_hz();
        let mut problems = Vec::new();
        for id in ALL_SENSORS {
            let r = self.rate(id);
            if r == 0 {
                problems.push(format!("{id}: rate must be positive"));
            } else if target % r != 0 {
                problems.push(format!("{id}: {r} Hz does not divide target {target} Hz"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigValidation(problems))
        }
    }

    /// Whether a sensor produces a fresh sample at aligned step `k`
    /// of the target-frequency grid.
    pub fn is_fresh(&self, id: SensorId, step_index: u64) -> bool {
        let ratio = (self.target_hz() / self.rate(id)) as u64;
        step_index % ratio == 0
    }
}

/// Per-sensor measurement noise (1-sigma, units of the state).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gps_position: f64,
    pub gps_velocity: f64,
    pub gyro_angle: f64,
    pub gyro_rate: f64,
    pub accel: f64,
    pub mag: f64,
    pub baro: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            gps_position: 1.0,
            gps_velocity: 0.1,
            gyro_angle: 0.005,
            gyro_rate: 0.01,
            accel: 0.05,
            mag: 0.01,
            baro: 0.1,
        }
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        NoiseConfig {
            gps_position: 0.0,
            gps_velocity: 0.0,
            gyro_angle: 0.0,
            gyro_rate: 0.0,
            accel: 0.0,
            mag: 0.0,
            baro: 0.0,
        }
    }

    pub fn sigma_for(&self, component: usize) -> f64 {
        match component {
            idx::X | idx::Y | idx::Z => self.gps_position,
            idx::VX | idx::VY | idx::VZ => self.gps_velocity,
            idx::ROLL | idx::PITCH | idx::YAW => self.gyro_angle,
            idx::WROLL | idx::WPITCH | idx::WYAW => self.gyro_rate,
            idx::AX | idx::AY | idx::AZ => self.accel,
            idx::MX | idx::MY | idx::MZ => self.mag,
            idx::ALT => self.baro,
            _ => 0.0,
        }
    }

    /// Per-component sigma vector in state order.
    pub fn sigmas(&self) -> [f64; STATE_DIM] {
        let mut s = [0.0; STATE_DIM];
        for (i, v) in s.iter_mut().enumerate() {
            *v = self.sigma_for(i);
        }
        s
    }
}

/// One reading of a single sensor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensorReading {
    pub timestamp: f64,
    pub fresh: bool,
    /// Values in state order for this sensor's components.
    pub values: [f64; 6],
}

/// One multi-rate sampling instant across the whole suite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    pub readings: [SensorReading; 5],
}

impl SensorFrame {
    pub fn reading(&self, id: SensorId) -> &SensorReading {
        &self.readings[id.ordinal()]
    }

    pub fn reading_mut(&mut self, id: SensorId) -> &mut SensorReading {
        &mut self.readings[id.ordinal()]
    }

    /// Scatter all sensor readings into a full StateVector.
    pub fn to_state(&self) -> StateVector {
        let mut s = StateVector::zeros();
        for id in ALL_SENSORS {
            let comps = states_for_sensor(id);
            let r = self.reading(id);
            for (j, &c) in comps.iter().enumerate() {
                s[c] = r.values[j];
            }
        }
        s
    }

    pub fn value_of(&self, component: usize) -> f64 {
        let id = sensor_for_state(component);
        let pos = states_for_sensor(id)
            .iter()
            .position(|&c| c == component)
            .unwrap();
        self.reading(id).values[pos]
    }
}

/// Sample the sensor suite at aligned step `step_index` of the
/// target-frequency grid. Sensors due at this instant produce fresh
/// readings (truth plus Gaussian noise); the rest hold `previous`.
pub fn sample_sensors(
    true_state: &StateVector,
    t: f64,
    step_index: u64,
    plan: &SamplingPlan,
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
    previous: Option<&SensorFrame>,
) -> Result<SensorFrame> {
    let mut readings = [SensorReading {
        timestamp: t,
        fresh: false,
        values: [0.0; 6],
    }; 5];

    for id in ALL_SENSORS {
        let comps = states_for_sensor(id);
        let ord = id.ordinal();
        if plan.is_fresh(id, step_index) {
            readings[ord].fresh = true;
            readings[ord].timestamp = t;
            for (j, &c) in comps.iter().enumerate() {
                // Draw noise unconditionally so the rng stream layout
                // does not depend on the noise magnitudes.
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let n = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                readings[ord].values[j] = true_state[c] + noise.sigma_for(c) * n;
            }
        } else {
            let prev = previous.ok_or_else(|| Error::MissingBootstrap(id.name().to_string()))?;
            let pr = prev.reading(id);
            readings[ord].fresh = false;
            readings[ord].timestamp = pr.timestamp;
            readings[ord].values = pr.values;
        }
    }
    Ok(SensorFrame { t, readings })
}

/// Align a multi-rate frame history onto the target-frequency grid by
/// duplicating the most recent fresh reading of each sensor. No
/// interpolation: every output value equals some input value.
pub fn align_streams(frames: &[SensorFrame]) -> Result<Vec<SensorFrame>> {
    let mut last_fresh: [Option<SensorReading>; 5] = [None; 5];
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let mut aligned = *f;
        for id in ALL_SENSORS {
            let ord = id.ordinal();
            let r = aligned.reading(id);
            if r.fresh {
                last_fresh[ord] = Some(*r);
            } else {
                match last_fresh[ord] {
                    Some(held) => {
                        let slot = aligned.reading_mut(id);
                        slot.values = held.values;
                        slot.timestamp = held.timestamp;
                        slot.fresh = false;
                    }
                    None => return Err(Error::MissingBootstrap(id.name().to_string())),
                }
            }
        }
        out.push(aligned);
    }
    Ok(out)
}
