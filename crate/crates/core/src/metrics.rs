//! Outcome classification and campaign metrics: attitude RMSD against
//! a same-seed attack-free twin, normalized RMSD, and percentage
//! mission delay.

use crate::error::{Error, Result};
use crate::mission::MissionLog;
use crate::state::{angle_distance, idx};
use serde::{Deserialize, Serialize};

/// Final deviation (m) at which a run stops counting as a success.
pub const SUCCESS_DEVIATION_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissionOutcome {
    Success,
    Diverted,
    Crashed,
    Stalled,
    Unfinished,
}

impl MissionOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            MissionOutcome::Success => "success",
            MissionOutcome::Diverted => "diverted",
            MissionOutcome::Crashed => "crashed",
            MissionOutcome::Stalled => "stalled",
            MissionOutcome::Unfinished => "unfinished",
        }
    }
}

/// True distance between the final vehicle position and the final
/// waypoint.
pub fn final_deviation(log: &MissionLog) -> f64 {
    let s = &log.final_truth;
    let wp = log.final_waypoint;
    ((s[idx::X] - wp[0]).powi(2) + (s[idx::Y] - wp[1]).powi(2) + (s[idx::Z] - wp[2]).powi(2))
        .sqrt()
}

/// Classify a finished run. Success requires believed completion, no
/// crash or stall, and a true final deviation under the bound.
pub fn mission_outcome(log: &MissionLog) -> MissionOutcome {
    if log.crashed_at.is_some() {
        return MissionOutcome::Crashed;
    }
    if log.stalled_at.is_some() {
        return MissionOutcome::Stalled;
    }
    if log.completed_at.is_none() {
        return MissionOutcome::Unfinished;
    }
    if final_deviation(log) < SUCCESS_DEVIATION_M {
        MissionOutcome::Success
    } else {
        MissionOutcome::Diverted
    }
}

/// Root-mean-square attitude deviation against the same-seed
/// attack-free twin, pooled over roll, pitch, and yaw (rad). Compared
/// over the overlap of the two runs.
pub fn attitude_rmsd(run: &MissionLog, twin: &MissionLog) -> Result<f64> {
    let n = run.truth_pose.len().min(twin.truth_pose.len());
    if n == 0 {
        return Err(Error::InsufficientData("empty pose traces".into()));
    }
    let mut sum = 0.0;
    for k in 0..n {
        for a in 3..6 {
            sum += angle_distance(run.truth_pose[k][a], twin.truth_pose[k][a]).powi(2);
        }
    }
    Ok((sum / (3 * n) as f64).sqrt())
}

/// Min-max normalization over an ensemble, clamped to [0, 1]. A
/// degenerate ensemble (all values equal) maps to zero.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InsufficientData("nothing to normalize".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normalization input"));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    Ok(values
        .iter()
        .map(|v| {
            if span <= 0.0 {
                0.0
            } else {
                ((v - min) / span).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// Reference duration for delay percentages: the midpoint of the
/// fastest and slowest attack-free completion in the ensemble.
pub fn baseline_duration(attack_free_completions: &[f64]) -> Result<f64> {
    if attack_free_completions.is_empty() {
        return Err(Error::NoBaseline);
    }
    if attack_free_completions.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::NoBaseline);
    }
    let min = attack_free_completions
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max = attack_free_completions
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((min + max) / 2.0)
}

/// Percentage mission delay of a recovered run against its twin:
/// (t_recovered - t_twin) / t_baseline * 100.
pub fn mission_delay_pct(run: &MissionLog, twin: &MissionLog, baseline: f64) -> Result<f64> {
    let t_rec = run.completed_at.ok_or_else(|| {
        Error::InsufficientData("delay undefined: run did not complete".into())
    })?;
    let t_ref = twin.completed_at.ok_or(Error::NoBaseline)?;
    if !(baseline > 0.0) {
        return Err(Error::NoBaseline);
    }
    Ok((t_rec - t_ref) / baseline * 100.0)
}

/// One row of the campaign report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub mission_id: String,
    pub seed: u64,
    pub sensors_targeted: String,
    pub attack_onset: Option<f64>,
    pub detected_at: Option<f64>,
    pub diagnosed: String,
    pub diagnosis_exact: bool,
    pub outcome: MissionOutcome,
    pub final_deviation_m: f64,
    pub rmsd_rad: Option<f64>,
    pub normalized_rmsd: Option<f64>,
    pub delay_pct: Option<f64>,
    pub completed_at: Option<f64>,
}
