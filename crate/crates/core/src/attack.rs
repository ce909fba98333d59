//! Sensor-deception attack injection: per-sensor additive bias within
//! the physical-limit envelope, range-gated activation around an
//! emitter, and stealthy bias profiles.

use crate::error::{Error, Result};
use crate::sensing::{states_for_sensor, SensorFrame, SensorId};
use crate::state::idx;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Altitude equivalent of the 0.1 kPa barometer bias limit
/// (standard-atmosphere gradient, ~8.5 m per 0.1 kPa).
pub const BARO_ALT_PER_LIMIT: f64 = 8.5;

/// Physical bias limit per sensor, in the units the bias is applied in.
pub fn bias_limit(id: SensorId) -> f64 {
    match id {
        SensorId::Gps => 50.0,
        SensorId::Gyroscope => 9.47,
        SensorId::Accelerometer => 6.2,
        SensorId::Magnetometer => std::f64::consts::PI, // 180 degrees
        SensorId::Barometer => BARO_ALT_PER_LIMIT,
    }
}

/// Maximum emitter range over which a sensor can be influenced (m).
pub fn max_attack_range(id: SensorId) -> f64 {
    match id {
        SensorId::Gps => 200.0,
        SensorId::Gyroscope => 100.0,
        SensorId::Accelerometer => 26.0,
        // No physical range data; bounded by the activation range.
        SensorId::Magnetometer | SensorId::Barometer => f64::INFINITY,
    }
}

/// Time course of the injected bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StealthProfile {
    /// Overt attack: the bias toggles on/off with the given period so
    /// consecutive samples keep disagreeing (receiver hopping).
    Hopping { period: f64 },
    /// Constant bias from onset (stealthy when below the instant
    /// detector threshold).
    Persistent,
    /// Random bias, uniform in [-bound, bound] per fresh sample.
    RandomBias,
    /// Gradually increasing bias: base + slope * (t - onset).
    Gradual { slope: f64 },
    /// Intermittent bias: base during the duty fraction of each period.
    Intermittent { duty: f64, period: f64 },
}

impl StealthProfile {
    pub fn tag(&self) -> &'static str {
        match self {
            StealthProfile::Hopping { .. } => "none",
            StealthProfile::Persistent => "persistent",
            StealthProfile::RandomBias => "a1",
            StealthProfile::Gradual { .. } => "a2",
            StealthProfile::Intermittent { .. } => "a3",
        }
    }
}

/// Evaluate the bias magnitude for a profile at `t` seconds past the
/// attack onset. `base` is the configured bias (also the A1 bound).
pub fn stealth_bias(profile: &StealthProfile, base: f64, t_since_onset: f64, rng: &mut ChaCha8Rng) -> f64 {
    match *profile {
        StealthProfile::Hopping { period } => {
            let half = period / 2.0;
            // half-slot phase shift: sampling instants typically land
            // exactly on slot boundaries, where float jitter would
            // otherwise make the toggle irregular
            if ((t_since_onset / half + 0.5).floor() as i64) % 2 == 0 {
                base
            } else {
                0.0
            }
        }
        StealthProfile::Persistent => base,
        StealthProfile::RandomBias => rng.gen_range(-base..=base),
        StealthProfile::Gradual { slope } => base + slope * t_since_onset,
        StealthProfile::Intermittent { duty, period } => {
            let phase = (t_since_onset / period).fract();
            if phase < duty {
                base
            } else {
                0.0
            }
        }
    }
}

/// One attack instance: targeted sensors, bias magnitudes, emitter
/// geometry, activation window, and bias profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSpec {
    pub sensors: BTreeSet<SensorId>,
    /// Bias magnitude per sensor in application units (GPS m, gyro rad,
    /// accel m/s², mag rad of field rotation, baro m of altitude).
    pub bias: Vec<(SensorId, f64)>,
    /// Emitter position, world frame (m).
    pub emitter: [f64; 3],
    /// Activation range around the emitter (m).
    pub range: f64,
    /// Active time window [start, end) in mission seconds.
    pub window: (f64, f64),
    pub profile: StealthProfile,
    pub seed: u64,
    /// Direction of the GPS position offset (unit vector).
    #[serde(default = "default_gps_direction")]
    pub gps_direction: [f64; 3],
}

fn default_gps_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl AttackSpec {
    pub fn new(
        sensors: impl IntoIterator<Item = (SensorId, f64)>,
        emitter: [f64; 3],
        range: f64,
        window: (f64, f64),
        profile: StealthProfile,
        seed: u64,
    ) -> Result<Self> {
        let bias: Vec<(SensorId, f64)> = sensors.into_iter().collect();
        let spec = AttackSpec {
            sensors: bias.iter().map(|(s, _)| *s).collect(),
            bias,
            emitter,
            range,
            window,
            profile,
            seed,
            gps_direction: [1.0, 0.0, 0.0],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (id, b) in &self.bias {
            let limit = bias_limit(*id);
            if b.abs() > limit {
                problems.push(format!("{id}: bias {b} exceeds physical limit {limit}"));
            }
        }
        if self.range <= 0.0 || self.range > max_attack_range(SensorId::Gps) {
            problems.push(format!(
                "activation range {} outside (0, {}]",
                self.range,
                max_attack_range(SensorId::Gps)
            ));
        }
        if self.window.1 < self.window.0 {
            problems.push("attack window end precedes start".into());
        }
        if let StealthProfile::Intermittent { duty, period } = self.profile {
            if !(0.0..=1.0).contains(&duty) || period <= 0.0 {
                problems.push("intermittent profile needs duty in [0,1], period > 0".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigValidation(problems))
        }
    }

    pub fn bias_for(&self, id: SensorId) -> f64 {
        self.bias
            .iter()
            .find(|(s, _)| *s == id)
            .map(|(_, b)| *b)
            .unwrap_or(0.0)
    }

    pub fn onset(&self) -> f64 {
        self.window.0
    }

    fn in_window(&self, t: f64) -> bool {
        t >= self.window.0 && t < self.window.1
    }

    fn in_range(&self, id: SensorId, rv_position: [f64; 3]) -> bool {
        let d2 = (rv_position[0] - self.emitter[0]).powi(2)
            + (rv_position[1] - self.emitter[1]).powi(2)
            + (rv_position[2] - self.emitter[2]).powi(2);
        let eff = self.range.min(max_attack_range(id));
        d2.sqrt() <= eff
    }
}

/// Mutable per-mission state of one attack instance (owns the seeded
/// stream the A1 profile draws from).
#[derive(Debug, Clone)]
pub struct AttackInstance {
    pub spec: AttackSpec,
    rng: ChaCha8Rng,
}

impl AttackInstance {
    pub fn new(spec: AttackSpec) -> Result<Self> {
        spec.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(AttackInstance { spec, rng })
    }

    /// True if the attack influences the vehicle at (t, position),
    /// irrespective of bias phase.
    pub fn influences(&self, t: f64, rv_position: [f64; 3]) -> bool {
        self.spec.in_window(t)
            && self
                .spec
                .sensors
                .iter()
                .any(|id| self.spec.in_range(*id, rv_position))
    }

    /// Bias every fresh reading of a targeted, in-window, in-range
    /// sensor. Held readings carry the bias already applied at their
    /// sampling instant, so each fresh value is biased exactly once.
    pub fn apply(&mut self, frame: &SensorFrame, t: f64, rv_position: [f64; 3]) -> SensorFrame {
        let mut out = *frame;
        if !self.spec.in_window(t) {
            return out;
        }
        for id in self.spec.sensors.clone() {
            if !self.spec.in_range(id, rv_position) {
                continue;
            }
            let reading = out.reading_mut(id);
            if !reading.fresh {
                continue;
            }
            let base = self.spec.bias_for(id);
            let b = stealth_bias(&self.spec.profile, base, t - self.spec.onset(), &mut self.rng);
            match id {
                SensorId::Gps => {
                    for (j, &c) in states_for_sensor(id).iter().enumerate() {
                        if c == idx::X || c == idx::Y || c == idx::Z {
                            let axis = c - idx::X;
                            reading.values[j] += b * self.spec.gps_direction[axis];
                        }
                    }
                }
                SensorId::Gyroscope => {
                    // Angle channels only; rates are left untouched.
                    for j in 0..3 {
                        reading.values[j] = crate::state::wrap_angle(reading.values[j] + b);
                    }
                }
                SensorId::Accelerometer => {
                    for j in 0..3 {
                        reading.values[j] += b;
                    }
                }
                SensorId::Magnetometer => {
                    // Rotate the measured field about the body z axis.
                    let (x, y) = (reading.values[0], reading.values[1]);
                    reading.values[0] = x * b.cos() - y * b.sin();
                    reading.values[1] = x * b.sin() + y * b.cos();
                }
                SensorId::Barometer => {
                    reading.values[0] += b;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{sample_sensors, NoiseConfig, SamplingPlan};
    use crate::vehicle::{hover_state, VehicleParams};

    fn frame_at(pos: [f64; 3]) -> SensorFrame {
        let p = VehicleParams::default();
        let truth = hover_state(&p, pos);
        let plan = SamplingPlan::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        sample_sensors(&truth, 0.0, 0, &plan, &NoiseConfig::zero(), &mut rng, None).unwrap()
    }

    fn gps_spec(range: f64) -> AttackSpec {
        AttackSpec::new(
            [(SensorId::Gps, 50.0)],
            [0.0, 0.0, 0.0],
            range,
            (0.0, 100.0),
            StealthProfile::Persistent,
            1,
        )
        .unwrap()
    }

    #[test]
    fn out_of_range_leaves_frame_unchanged() {
        let frame = frame_at([250.0, 0.0, 0.0]);
        let mut inst = AttackInstance::new(gps_spec(200.0)).unwrap();
        let out = inst.apply(&frame, 10.0, [250.0, 0.0, 0.0]);
        assert_eq!(out.reading(SensorId::Gps).values, frame.reading(SensorId::Gps).values);
    }

    #[test]
    fn in_range_gps_bias_shifts_x() {
        let frame = frame_at([10.0, 0.0, 0.0]);
        let mut inst = AttackInstance::new(gps_spec(200.0)).unwrap();
        let out = inst.apply(&frame, 10.0, [10.0, 0.0, 0.0]);
        assert_eq!(out.reading(SensorId::Gps).values[0], 60.0);
        // Untargeted sensors untouched.
        assert_eq!(
            out.reading(SensorId::Barometer).values,
            frame.reading(SensorId::Barometer).values
        );
    }

    #[test]
    fn empty_target_set_is_identity() {
        let frame = frame_at([0.0; 3]);
        let spec = AttackSpec::new(
            std::iter::empty(),
            [0.0; 3],
            200.0,
            (0.0, 100.0),
            StealthProfile::Persistent,
            0,
        )
        .unwrap();
        let mut inst = AttackInstance::new(spec).unwrap();
        let out = inst.apply(&frame, 1.0, [0.0; 3]);
        for id in crate::sensing::ALL_SENSORS {
            assert_eq!(out.reading(id).values, frame.reading(id).values);
        }
    }

    #[test]
    fn bias_limits_enforced_at_construction() {
        assert!(AttackSpec::new(
            [(SensorId::Gps, 51.0)],
            [0.0; 3],
            200.0,
            (0.0, 1.0),
            StealthProfile::Persistent,
            0,
        )
        .is_err());
        assert!(AttackSpec::new(
            [(SensorId::Accelerometer, 6.3)],
            [0.0; 3],
            26.0,
            (0.0, 1.0),
            StealthProfile::Persistent,
            0,
        )
        .is_err());
    }

    #[test]
    fn gradual_ramp_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a2 = StealthProfile::Gradual { slope: 0.1 };
        assert_eq!(stealth_bias(&a2, 0.0, 0.0, &mut rng), 0.0);
        assert!((stealth_bias(&a2, 0.0, 10.0, &mut rng) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intermittent_off_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a3 = StealthProfile::Intermittent {
            duty: 0.5,
            period: 2.0,
        };
        assert_eq!(stealth_bias(&a3, 3.0, 1.5, &mut rng), 0.0);
        assert_eq!(stealth_bias(&a3, 3.0, 0.5, &mut rng), 3.0);
    }

    #[test]
    fn random_bias_bounded_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = stealth_bias(&StealthProfile::RandomBias, 2.0, 1.0, &mut a);
            let y = stealth_bias(&StealthProfile::RandomBias, 2.0, 1.0, &mut b);
            assert_eq!(x, y);
            assert!(x.abs() <= 2.0);
        }
    }

    #[test]
    fn accel_range_capped_below_activation_range() {
        // Emitter 30 m away: inside the 200 m activation range but past
        // the 26 m accelerometer coupling limit.
        let spec = AttackSpec::new(
            [(SensorId::Accelerometer, 5.0)],
            [30.0, 0.0, 0.0],
            200.0,
            (0.0, 100.0),
            StealthProfile::Persistent,
            0,
        )
        .unwrap();
        let frame = frame_at([0.0; 3]);
        let mut inst = AttackInstance::new(spec).unwrap();
        let out = inst.apply(&frame, 1.0, [0.0; 3]);
        assert_eq!(
            out.reading(SensorId::Accelerometer).values,
            frame.reading(SensorId::Accelerometer).values
        );
    }
}
