//! Factor-graph attack diagnosis.
//!
//! Each state has a binary outcome (benign/malicious) and a 0/1 factor
//! over two non-overlapping error pairs drawn from four consecutive
//! error-stream samples. Inference is exact MLE with uniform priors;
//! a brute-force joint enumeration over all outcome assignments serves
//! as the oracle. Malicious states map to sensors through the
//! states-to-sensor table.

use crate::error::{Error, Result};
use crate::sensing::{sensor_for_state, SensorId};
use crate::state::{StateVector, STATE_DIM};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Per-state error-inflation thresholds, derived from attack-free
/// missions as median + k * stdev.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaProfile {
    pub delta: [f64; STATE_DIM],
    pub k: f64,
}

impl DeltaProfile {
    pub fn validate(&self) -> Result<()> {
        if self.delta.iter().all(|d| *d > 0.0 && d.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain("delta thresholds must be positive".into()))
        }
    }
}

/// Two non-overlapping error pairs per state, built from four
/// consecutive aligned states:
/// e_cur = |state_t - state_{t-1}|, e_prev = |state_{t-2} - state_{t-3}|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorWindow {
    pub e_prev: [f64; STATE_DIM],
    pub e_cur: [f64; STATE_DIM],
}

impl ErrorWindow {
    pub fn from_states(s: &[StateVector; 4]) -> Self {
        let mut e_prev = [0.0; STATE_DIM];
        let mut e_cur = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            e_prev[i] = s[1].component_distance(&s[0], i);
            e_cur[i] = s[3].component_distance(&s[2], i);
        }
        ErrorWindow { e_prev, e_cur }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Benign,
    Malicious,
}

/// The per-state factor function.
///
/// Value 1 for the malicious outcome when both error samples exceed
/// delta; when the condition fails, the benign outcome carries the
/// unit value instead, so the posterior is always well defined.
pub fn factor_eval(e_prev: f64, e_cur: f64, outcome: Outcome, delta: f64) -> u8 {
    let inflated = e_cur > delta && e_prev > delta;
    match (inflated, outcome) {
        (true, Outcome::Malicious) => 1,
        (false, Outcome::Benign) => 1,
        _ => 0,
    }
}

/// Diagnosis verdict: per-state posteriors and the implicated sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosisResult {
    pub posterior: [f64; STATE_DIM],
    pub malicious_states: Vec<usize>,
    pub malicious_sensors: BTreeSet<SensorId>,
    pub decided_at: f64,
}

impl DiagnosisResult {
    fn from_posterior(posterior: [f64; STATE_DIM], t: f64) -> Self {
        let malicious_states: Vec<usize> = (0..STATE_DIM)
            .filter(|&i| posterior[i] > 0.5)
            .collect();
        let malicious_sensors: BTreeSet<SensorId> = malicious_states
            .iter()
            .map(|&i| sensor_for_state(i))
            .collect();
        DiagnosisResult {
            posterior,
            malicious_states,
            malicious_sensors,
            decided_at: t,
        }
    }
}

/// Exact MLE inference with uniform 0.5/0.5 priors. The joint
/// factorizes per state, so each marginal is
/// prior * f(malicious) / (prior * f(malicious) + prior * f(benign)).
pub fn infer(window: &ErrorWindow, profile: &DeltaProfile, t: f64) -> DiagnosisResult {
    let mut posterior = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        let fm = factor_eval(window.e_prev[i], window.e_cur[i], Outcome::Malicious, profile.delta[i])
            as f64;
        let fb = factor_eval(window.e_prev[i], window.e_cur[i], Outcome::Benign, profile.delta[i])
            as f64;
        let num = 0.5 * fm;
        let den = 0.5 * fm + 0.5 * fb;
        posterior[i] = if den == 0.0 { 0.5 } else { num / den };
    }
    DiagnosisResult::from_posterior(posterior, t)
}

/// Brute-force oracle: exhaustively enumerate every binary outcome
/// assignment over the first `n` states, weight each joint assignment
/// by the product of factors and priors, and marginalize per state.
///
/// Enumeration is a depth-first walk of the assignment tree with
/// zero-product subtrees pruned, which visits exactly the assignments
/// a flat enumeration would sum without changing any total.
pub fn brute_force_posterior(
    window: &ErrorWindow,
    profile: &DeltaProfile,
    n: usize,
) -> Result<Vec<f64>> {
    if n > 20 {
        return Err(Error::Domain(format!(
            "enumeration over {n} states exceeds the 2^20 bound"
        )));
    }

    // factor values per state and outcome, precomputed
    let mut fvals = vec![[0.0f64; 2]; n];
    for i in 0..n {
        fvals[i][0] = factor_eval(
            window.e_prev[i],
            window.e_cur[i],
            Outcome::Benign,
            profile.delta[i],
        ) as f64;
        fvals[i][1] = factor_eval(
            window.e_prev[i],
            window.e_cur[i],
            Outcome::Malicious,
            profile.delta[i],
        ) as f64;
    }

    let mut total = 0.0f64;
    let mut mal_mass = vec![0.0f64; n];
    let mut assignment = vec![0usize; n];

    // DFS over assignments; weight = prod prior * factor.
    fn walk(
        depth: usize,
        weight: f64,
        fvals: &[[f64; 2]],
        assignment: &mut [usize],
        total: &mut f64,
        mal_mass: &mut [f64],
    ) {
        if weight == 0.0 {
            return;
        }
        if depth == fvals.len() {
            *total += weight;
            for (i, &a) in assignment.iter().enumerate() {
                if a == 1 {
                    mal_mass[i] += weight;
                }
            }
            return;
        }
        for outcome in 0..2 {
            assignment[depth] = outcome;
            walk(
                depth + 1,
                weight * 0.5 * fvals[depth][outcome],
                fvals,
                assignment,
                total,
                mal_mass,
            );
        }
    }
    walk(0, 1.0, &fvals, &mut assignment, &mut total, &mut mal_mass);

    let posterior = (0..n)
        .map(|i| if total == 0.0 { 0.5 } else { mal_mass[i] / total })
        .collect();
    Ok(posterior)
}

/// Calibrate per-state deltas from pooled attack-free error samples.
///
/// `error_traces` holds one stream of per-state error samples per
/// mission, taken at the diagnosis cadence.
pub fn calibrate_delta(
    error_traces: &[Vec<[f64; STATE_DIM]>],
    k: f64,
) -> Result<DeltaProfile> {
    if error_traces.len() < 15 {
        return Err(Error::InsufficientData(format!(
            "delta calibration needs >= 15 attack-free missions, got {}",
            error_traces.len()
        )));
    }
    let total_samples: usize = error_traces.iter().map(|t| t.len()).sum();
    if total_samples < 1000 {
        return Err(Error::InsufficientData(format!(
            "delta calibration needs >= 1000 error samples per state, got {total_samples}"
        )));
    }

    let mut delta = [0.0; STATE_DIM];
    for (i, di) in delta.iter_mut().enumerate() {
        let mut pooled: Vec<f64> = error_traces
            .iter()
            .flat_map(|t| t.iter().map(move |e| e[i]))
            .collect();
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let sd = (pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if pooled.len() % 2 == 1 {
            pooled[pooled.len() / 2]
        } else {
            0.5 * (pooled[pooled.len() / 2 - 1] + pooled[pooled.len() / 2])
        };
        // floored above the largest benign error so held-out
        // attack-free windows keep headroom below delta
        let max_obs = *pooled.last().unwrap();
        *di = (med + k * sd).max(1.3 * max_obs).max(1e-9);
    }
    let profile = DeltaProfile { delta, k };
    profile.validate()?;
    Ok(profile)
}

/// Fraction of samples below delta per state; the coverage report for
/// held-out validation traces.
pub fn delta_coverage(profile: &DeltaProfile, traces: &[Vec<[f64; STATE_DIM]>]) -> [f64; STATE_DIM] {
    let mut below = [0usize; STATE_DIM];
    let mut total = [0usize; STATE_DIM];
    for tr in traces {
        for e in tr {
            for i in 0..STATE_DIM {
                total[i] += 1;
                if e[i] < profile.delta[i] {
                    below[i] += 1;
                }
            }
        }
    }
    let mut cov = [1.0; STATE_DIM];
    for i in 0..STATE_DIM {
        if total[i] > 0 {
            cov[i] = below[i] as f64 / total[i] as f64;
        }
    }
    cov
}
