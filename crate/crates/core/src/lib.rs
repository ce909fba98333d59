//! Software-in-the-loop simulator for sensor-deception attacks on
//! robotic vehicles: vehicle dynamics, multi-rate sensing, attack
//! injection, residual/CUSUM detection, factor-graph diagnosis,
//! checkpointed state reconstruction, and LQR-based targeted recovery,
//! plus a deterministic batch harness.

pub mod attack;
pub mod batch;
pub mod calib;
pub mod checkpoint;
pub mod config;
pub mod control;
pub mod detect;
pub mod diagnose;
pub mod error;
pub mod ekf;
pub mod metrics;
pub mod mission;
pub mod sensing;
pub mod state;
pub mod sysid;
pub mod vehicle;

pub use error::{Error, Result};
