//! Batch campaign runner: attacked missions paired with same-seed
//! attack-free twins, plus wind-only runs for false-alarm accounting.
//! Output is a deterministic CSV report.

use crate::attack::{bias_limit, AttackSpec, StealthProfile};
use crate::calib::{ensemble_variant, Calibration, RecoveryOptions};
use crate::diagnose::DeltaProfile;
use crate::error::Result;
use crate::metrics::{
    attitude_rmsd, baseline_duration, final_deviation, mission_delay_pct, mission_outcome,
    normalize, MissionMetrics, MissionOutcome,
};
use crate::mission::{run_mission, MissionConfig, MissionLog, MissionSetup};
use crate::sensing::{SensorId, ALL_SENSORS};
use crate::state::idx;
use crate::vehicle::MAG_WORLD;
use rayon::prelude::*;
use std::collections::BTreeSet;

/// Campaign description: how many attacked and wind-only missions to
/// run off a template, which sensor-subset sizes to cycle through, and
/// how to size each bias relative to the diagnosis deltas.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub template: MissionConfig,
    pub recovery: RecoveryOptions,
    pub attacked_runs: usize,
    pub benign_runs: usize,
    /// Subset sizes cycled across attacked missions (values in 1..=5).
    pub sensor_counts: Vec<usize>,
    /// Bias magnitude as a multiple of the relevant delta threshold.
    pub bias_factor: f64,
    pub attack_onset: f64,
    /// How long each attack stays active (s); infinite keeps it on for
    /// the rest of the mission.
    pub attack_duration: f64,
    /// Offsets the ensemble seeds so different campaigns do not share
    /// noise streams.
    pub seed_offset: u64,
}

impl CampaignConfig {
    pub fn new(template: MissionConfig) -> Self {
        CampaignConfig {
            template,
            recovery: RecoveryOptions::default(),
            attacked_runs: 25,
            benign_runs: 10,
            sensor_counts: vec![1, 2, 3, 4],
            bias_factor: 3.0,
            attack_onset: 6.0,
            attack_duration: f64::INFINITY,
            seed_offset: 0,
        }
    }
}

/// All subsets of the sensor suite with the given size, in a fixed
/// bitmask order.
pub fn sensor_subsets(size: usize) -> Vec<BTreeSet<SensorId>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << ALL_SENSORS.len()) {
        if mask.count_ones() as usize != size {
            continue;
        }
        out.push(
            ALL_SENSORS
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| *s)
                .collect(),
        );
    }
    out
}

/// Bias magnitude, in the sensor's application units, that inflates
/// the consecutive-sample error of the sensor's states to `factor`
/// times their delta threshold under a per-sample toggling profile.
pub fn bias_for_sensor(id: SensorId, delta: &DeltaProfile, factor: f64) -> f64 {
    let maxd = |sel: &[usize]| {
        sel.iter()
            .map(|&i| delta.delta[i])
            .fold(0.0f64, f64::max)
    };
    let raw = match id {
        SensorId::Gps => factor * delta.delta[idx::X],
        SensorId::Gyroscope => factor * maxd(&[idx::ROLL, idx::PITCH, idx::YAW]),
        SensorId::Accelerometer => factor * maxd(&[idx::AX, idx::AY, idx::AZ]),
        SensorId::Magnetometer => {
            // A rotation b of the measured field moves the horizontal
            // components by about |B_h| * b.
            let bh = (MAG_WORLD[0].powi(2) + MAG_WORLD[1].powi(2)).sqrt();
            factor * maxd(&[idx::MX, idx::MY]) / bh
        }
        SensorId::Barometer => factor * delta.delta[idx::ALT],
    };
    raw.min(bias_limit(id))
}

fn hopping_attack(
    sensors: &BTreeSet<SensorId>,
    delta: &DeltaProfile,
    factor: f64,
    onset: f64,
    duration: f64,
    seed: u64,
) -> Result<AttackSpec> {
    AttackSpec::new(
        sensors
            .iter()
            .map(|&id| (id, bias_for_sensor(id, delta, factor))),
        [0.0, 0.0, 0.0],
        200.0,
        (onset, onset + duration),
        StealthProfile::Hopping { period: 0.02 },
        seed,
    )
}

/// One attacked run paired with its twin, before ensemble-level
/// metrics are filled in.
#[derive(Debug)]
pub struct CampaignRun {
    pub metrics: MissionMetrics,
    pub log: MissionLog,
    pub twin: Option<MissionLog>,
}

/// Ensemble-level tallies over a finished campaign.
#[derive(Debug, Clone, Default)]
pub struct CampaignSummary {
    pub attacked_runs: usize,
    pub benign_runs: usize,
    pub detected: usize,
    /// Attacked runs whose diagnosed set equals the targeted set.
    pub exact_diagnoses: usize,
    /// Wind-only runs that raised an alarm.
    pub false_alarms: usize,
    pub successes: usize,
    pub mean_rmsd: Option<f64>,
    pub mean_delay_pct: Option<f64>,
}

impl CampaignSummary {
    pub fn true_positive_rate(&self) -> f64 {
        if self.attacked_runs == 0 {
            return 0.0;
        }
        self.exact_diagnoses as f64 / self.attacked_runs as f64
    }

    pub fn false_positive_rate(&self) -> f64 {
        if self.benign_runs == 0 {
            return 0.0;
        }
        self.false_alarms as f64 / self.benign_runs as f64
    }

    pub fn success_rate(&self) -> f64 {
        if self.attacked_runs == 0 {
            return 0.0;
        }
        self.successes as f64 / self.attacked_runs as f64
    }
}

#[derive(Debug)]
pub struct CampaignReport {
    pub runs: Vec<CampaignRun>,
    pub summary: CampaignSummary,
}

fn sensors_label(set: &BTreeSet<SensorId>) -> String {
    set.iter()
        .map(|s| s.name())
        .collect::<Vec<_>>()
        .join("+")
}

/// Run the full campaign: attacked missions (each with a same-seed
/// attack-free twin under the identical guard) followed by wind-only
/// missions. Rows come back sorted by mission id.
pub fn run_campaign(cfg: &CampaignConfig, cal: &Calibration) -> Result<CampaignReport> {
    cfg.template.validate()?;
    let dt = cfg.template.dt();
    let guard = cal.guard(dt, &cfg.recovery);

    let counts = if cfg.sensor_counts.is_empty() {
        vec![1]
    } else {
        cfg.sensor_counts.clone()
    };
    let subsets_by_size: Vec<Vec<BTreeSet<SensorId>>> =
        (0..=ALL_SENSORS.len()).map(sensor_subsets).collect();

    let attacked: Vec<CampaignRun> = (0..cfg.attacked_runs)
        .into_par_iter()
        .map(|i| -> Result<CampaignRun> {
            let size = counts[i % counts.len()];
            let pool = &subsets_by_size[size.clamp(1, ALL_SENSORS.len())];
            let sensors = &pool[(i / counts.len()) % pool.len()];
            let mission =
                ensemble_variant(&cfg.template, cfg.seed_offset + 10_000 + i as u64);
            let attack = hopping_attack(
                sensors,
                &cal.delta,
                cfg.bias_factor,
                cfg.attack_onset,
                cfg.attack_duration,
                0xA77AC + i as u64,
            )?;
            let log = run_mission(MissionSetup {
                mission: &mission,
                guard: Some(&guard),
                attacks: vec![attack],
                collect_streams: false,
            })?;
            let twin = run_mission(MissionSetup {
                mission: &mission,
                guard: Some(&guard),
                attacks: vec![],
                collect_streams: false,
            })?;
            let diagnosed = log
                .diagnosis
                .as_ref()
                .map(|d| d.sensors.clone())
                .unwrap_or_default();
            let metrics = MissionMetrics {
                mission_id: format!("atk-{i:04}"),
                seed: mission.seed,
                sensors_targeted: sensors_label(sensors),
                attack_onset: log.attack_onset,
                detected_at: log.detected_at,
                diagnosed: sensors_label(&diagnosed),
                diagnosis_exact: !diagnosed.is_empty() && diagnosed == *sensors,
                outcome: mission_outcome(&log),
                final_deviation_m: final_deviation(&log),
                rmsd_rad: attitude_rmsd(&log, &twin).ok(),
                normalized_rmsd: None,
                delay_pct: None,
                completed_at: log.completed_at,
            };
            Ok(CampaignRun {
                metrics,
                log,
                twin: Some(twin),
            })
        })
        .collect::<Result<_>>()?;

    let benign: Vec<CampaignRun> = (0..cfg.benign_runs)
        .into_par_iter()
        .map(|i| -> Result<CampaignRun> {
            let mission =
                ensemble_variant(&cfg.template, cfg.seed_offset + 50_000 + i as u64);
            let log = run_mission(MissionSetup {
                mission: &mission,
                guard: Some(&guard),
                attacks: vec![],
                collect_streams: false,
            })?;
            let metrics = MissionMetrics {
                mission_id: format!("wind-{i:04}"),
                seed: mission.seed,
                sensors_targeted: String::new(),
                attack_onset: None,
                detected_at: log.detected_at,
                diagnosed: log
                    .diagnosis
                    .as_ref()
                    .map(|d| sensors_label(&d.sensors))
                    .unwrap_or_default(),
                diagnosis_exact: false,
                outcome: mission_outcome(&log),
                final_deviation_m: final_deviation(&log),
                rmsd_rad: None,
                normalized_rmsd: None,
                delay_pct: None,
                completed_at: log.completed_at,
            };
            Ok(CampaignRun {
                metrics,
                log,
                twin: None,
            })
        })
        .collect::<Result<_>>()?;

    let mut runs: Vec<CampaignRun> = attacked.into_iter().chain(benign).collect();
    runs.sort_by(|a, b| a.metrics.mission_id.cmp(&b.metrics.mission_id));

    // delay against the midpoint of the fastest/slowest twin
    let twin_completions: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.twin.as_ref().and_then(|t| t.completed_at))
        .collect();
    if let Ok(baseline) = baseline_duration(&twin_completions) {
        for r in runs.iter_mut() {
            if let Some(twin) = &r.twin {
                r.metrics.delay_pct = mission_delay_pct(&r.log, twin, baseline).ok();
            }
        }
    }

    // min-max normalized RMSD over the attacked ensemble
    let rmsd_idx: Vec<usize> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.metrics.rmsd_rad.is_some())
        .map(|(i, _)| i)
        .collect();
    let rmsd_vals: Vec<f64> = rmsd_idx
        .iter()
        .map(|&i| runs[i].metrics.rmsd_rad.unwrap())
        .collect();
    if !rmsd_vals.is_empty() {
        let norm = normalize(&rmsd_vals)?;
        for (&i, v) in rmsd_idx.iter().zip(norm) {
            runs[i].metrics.normalized_rmsd = Some(v);
        }
    }

    let mut summary = CampaignSummary {
        attacked_runs: cfg.attacked_runs,
        benign_runs: cfg.benign_runs,
        ..Default::default()
    };
    let mut rmsd_sum = 0.0;
    let mut rmsd_n = 0usize;
    let mut delay_sum = 0.0;
    let mut delay_n = 0usize;
    for r in &runs {
        let attacked_run = !r.metrics.sensors_targeted.is_empty();
        if attacked_run {
            if r.metrics.detected_at.is_some() {
                summary.detected += 1;
            }
            if r.metrics.diagnosis_exact {
                summary.exact_diagnoses += 1;
            }
            if r.metrics.outcome == MissionOutcome::Success {
                summary.successes += 1;
            }
            if let Some(v) = r.metrics.rmsd_rad {
                rmsd_sum += v;
                rmsd_n += 1;
            }
            if let Some(v) = r.metrics.delay_pct {
                delay_sum += v;
                delay_n += 1;
            }
        } else if r.metrics.detected_at.is_some() {
            summary.false_alarms += 1;
        }
    }
    summary.mean_rmsd = (rmsd_n > 0).then(|| rmsd_sum / rmsd_n as f64);
    summary.mean_delay_pct = (delay_n > 0).then(|| delay_sum / delay_n as f64);

    Ok(CampaignReport { runs, summary })
}

pub const CSV_HEADER: &str = "mission_id,seed,sensors_targeted,attack_onset,detected_at,\
diagnosed,diagnosis_exact,outcome,final_deviation_m,rmsd_rad,normalized_rmsd,delay_pct,\
completed_at";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Deterministic CSV rendering: fixed six-decimal floats so a rerun
/// of the same campaign is byte-identical.
pub fn to_csv(rows: &[MissionMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{},{},{},{}\n",
            m.mission_id,
            m.seed,
            m.sensors_targeted,
            fmt_opt(m.attack_onset),
            fmt_opt(m.detected_at),
            m.diagnosed,
            m.diagnosis_exact,
            m.outcome.as_str(),
            m.final_deviation_m,
            fmt_opt(m.rmsd_rad),
            fmt_opt(m.normalized_rmsd),
            fmt_opt(m.delay_pct),
            fmt_opt(m.completed_at),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::STATE_DIM;

    #[test]
    fn subset_enumeration_counts_match_binomials() {
        // oracle: C(5, k)
        assert_eq!(sensor_subsets(1).len(), 5);
        assert_eq!(sensor_subsets(2).len(), 10);
        assert_eq!(sensor_subsets(3).len(), 10);
        assert_eq!(sensor_subsets(4).len(), 5);
        assert_eq!(sensor_subsets(5).len(), 1);
        for s in sensor_subsets(3) {
            assert_eq!(s.len(), 3);
        }
    }

    #[test]
    fn bias_sizing_clears_the_delta_threshold() {
        let delta = DeltaProfile {
            delta: [0.1; STATE_DIM],
            k: 3.0,
        };
        for id in ALL_SENSORS {
            let b = bias_for_sensor(id, &delta, 3.0);
            assert!(b > 0.0, "{id}");
            assert!(b <= bias_limit(id), "{id}");
        }
        // gps maps one-to-one onto position error
        assert!((bias_for_sensor(SensorId::Gps, &delta, 3.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn csv_rendering_is_stable() {
        let m = MissionMetrics {
            mission_id: "atk-0000".into(),
            seed: 7,
            sensors_targeted: "gps".into(),
            attack_onset: Some(6.0),
            detected_at: Some(6.01),
            diagnosed: "gps".into(),
            diagnosis_exact: true,
            outcome: MissionOutcome::Success,
            final_deviation_m: 0.25,
            rmsd_rad: Some(0.01),
            normalized_rmsd: Some(0.0),
            delay_pct: None,
            completed_at: Some(11.5),
        };
        let a = to_csv(std::slice::from_ref(&m));
        let b = to_csv(std::slice::from_ref(&m));
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert!(a.contains("atk-0000,7,gps,6.000000,6.010000,gps,true,success,0.250000"));
    }
}
