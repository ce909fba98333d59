//! Least-squares identification of vehicle model parameters from
//! one-step transition traces.
//!
//! A damped Gauss-Newton fit over the free parameters (quad: mass and
//! the three inertias; rover: axle distances) minimizing the sum of
//! squared one-step prediction errors of the integrator.

use crate::error::{Error, Result};
use crate::state::{idx, StateVector};
use crate::vehicle::{step, ControlInput, VehicleKind, VehicleParams};
use nalgebra::{DMatrix, DVector};

/// One observed transition: state, applied control, next state, step.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub state: StateVector,
    pub control: ControlInput,
    pub next: StateVector,
    pub dt: f64,
}

/// Components entering the fit residual (the dynamic states).
const FIT_COMPONENTS: [usize; 12] = [
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
];

fn free_param_count(kind: VehicleKind) -> usize {
    match kind {
        VehicleKind::Quad => 4,
        VehicleKind::Rover => 2,
    }
}

fn get_params(kind: VehicleKind, base: &VehicleParams, theta: &DVector<f64>) -> VehicleParams {
    let mut p = *base;
    match kind {
        VehicleKind::Quad => {
            p.mass = theta[0];
            p.inertia_x = theta[1];
            p.inertia_y = theta[2];
            p.inertia_z = theta[3];
        }
        VehicleKind::Rover => {
            p.axle_front = theta[0];
            p.axle_rear = theta[1];
        }
    }
    p
}

fn initial_theta(kind: VehicleKind, base: &VehicleParams) -> DVector<f64> {
    match kind {
        VehicleKind::Quad => DVector::from_vec(vec![
            base.mass,
            base.inertia_x,
            base.inertia_y,
            base.inertia_z,
        ]),
        VehicleKind::Rover => DVector::from_vec(vec![base.axle_front, base.axle_rear]),
    }
}

fn residuals(
    kind: VehicleKind,
    traces: &[Transition],
    base: &VehicleParams,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = get_params(kind, base, theta);
    p.validate()?;
    let mut r = DVector::zeros(traces.len() * FIT_COMPONENTS.len());
    for (k, tr) in traces.iter().enumerate() {
        let pred = step(kind, &tr.state, &tr.control, &p, [0.0; 3], tr.dt)?;
        for (j, &c) in FIT_COMPONENTS.iter().enumerate() {
            r[k * FIT_COMPONENTS.len() + j] = pred.component_distance(&tr.next, c)
                * (pred[c] - tr.next[c]).signum();
        }
    }
    Ok(r)
}

/// Fit the free parameters of the vehicle model from transition traces.
///
/// Returns the fitted parameters together with the final sum of
/// squared one-step prediction errors. The fit is seeded from `base`;
/// rank-deficient regressions (unexcited inputs) are rejected.
pub fn fit_params(
    kind: VehicleKind,
    traces: &[Transition],
    base: &VehicleParams,
) -> Result<(VehicleParams, f64)> {
    let n_free = free_param_count(kind);
    if traces.len() < 10 * n_free {
        return Err(Error::InsufficientData(format!(
            "need at least {} transitions for {} free parameters, got {}",
            10 * n_free,
            n_free,
            traces.len()
        )));
    }

    let mut theta = initial_theta(kind, base);
    let mut lambda = 1e-6;
    let mut r = residuals(kind, traces, base, &theta)?;
    let mut cost = r.norm_squared();

    for _ in 0..200 {
        // Forward-difference Jacobian of the stacked residual.
        let m = r.len();
        let mut jac = DMatrix::zeros(m, n_free);
        for j in 0..n_free {
            let h = 1e-6 * theta[j].abs().max(1e-6);
            let mut th = theta.clone();
            th[j] += h;
            let rp = residuals(kind, traces, base, &th)?;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }

        let jtj = jac.transpose() * &jac;
        let svd = jtj.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax <= 0.0 || smin / smax < 1e-12 {
            return Err(Error::IllConditioned(
                "regression rank-deficient; inputs not persistently exciting".into(),
            ));
        }

        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let damped = &jtj + DMatrix::from_diagonal(&jtj.diagonal()) * lambda;
            let delta = match damped.lu().solve(&jtr) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cand = &theta - &delta;
            if cand.iter().any(|v| !(*v > 0.0)) {
                lambda *= 10.0;
                continue;
            }
            let rc = match residuals(kind, traces, base, &cand) {
                Ok(rc) => rc,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cc = rc.norm_squared();
            if cc < cost {
                let rel_step = delta.norm() / theta.norm().max(1e-12);
                theta = cand;
                r = rc;
                cost = cc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel_step < 1e-10 {
                    return Ok((get_params(kind, base, &theta), cost));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok((get_params(kind, base, &theta), cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::hover_state;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_trace(p: &VehicleParams, noise: f64, seed: u64) -> Vec<Transition> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = hover_state(p, [0.0, 0.0, 10.0]);
        let dt = 0.0025;
        let mut out = Vec::new();
        for k in 0..1200 {
            let t = k as f64 * dt;
            let u = ControlInput::Quad {
                thrust: p.hover_thrust() * (1.0 + 0.2 * (3.0 * t).sin()),
                torque_roll: 0.01 * (5.0 * t).sin(),
                torque_pitch: 0.01 * (4.0 * t).cos(),
                torque_yaw: 0.005 * (2.0 * t).sin(),
            };
            let next = step(VehicleKind::Quad, &s, &u, p, [0.0; 3], dt).unwrap();
            let mut obs = next;
            if noise > 0.0 {
                for i in 0..crate::state::STATE_DIM {
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    let g = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    obs[i] += noise * obs[i].abs() * g;
                }
            }
            out.push(Transition {
                state: s,
                control: u,
                next: obs,
                dt,
            });
            s = next;
        }
        out
    }

    #[test]
    fn recovers_known_quad_params_noiseless() {
        let mut truth = VehicleParams::default();
        truth.mass = 1.23;
        truth.inertia_x = 0.021;
        truth.inertia_y = 0.034;
        truth.inertia_z = 0.052;
        let traces = quad_trace(&truth, 0.0, 1);
        let base = VehicleParams::default();
        let (fit, _res) = fit_params(VehicleKind::Quad, &traces, &base).unwrap();
        for (got, want) in [
            (fit.mass, truth.mass),
            (fit.inertia_x, truth.inertia_x),
            (fit.inertia_y, truth.inertia_y),
            (fit.inertia_z, truth.inertia_z),
        ] {
            assert!(
                ((got - want) / want).abs() < 1e-6,
                "param {got} vs {want}"
            );
        }
    }

    #[test]
    fn recovers_known_quad_params_with_noise() {
        let mut truth = VehicleParams::default();
        truth.mass = 1.8;
        truth.inertia_x = 0.025;
        truth.inertia_y = 0.028;
        truth.inertia_z = 0.055;
        let traces = quad_trace(&truth, 0.01, 2);
        let base = VehicleParams::default();
        let (fit, _res) = fit_params(VehicleKind::Quad, &traces, &base).unwrap();
        for (got, want) in [
            (fit.mass, truth.mass),
            (fit.inertia_x, truth.inertia_x),
            (fit.inertia_y, truth.inertia_y),
            (fit.inertia_z, truth.inertia_z),
        ] {
            assert!(
                ((got - want) / want).abs() < 0.05,
                "param {got} vs {want}"
            );
        }
    }

    #[test]
    fn constant_control_is_ill_conditioned() {
        let p = VehicleParams::default();
        let u = ControlInput::Quad {
            thrust: p.hover_thrust(),
            torque_roll: 0.0,
            torque_pitch: 0.0,
            torque_yaw: 0.0,
        };
        let s = hover_state(&p, [0.0, 0.0, 10.0]);
        let traces: Vec<Transition> = (0..100)
            .map(|_| Transition {
                state: s,
                control: u,
                next: s,
                dt: 0.0025,
            })
            .collect();
        match fit_params(VehicleKind::Quad, &traces, &p) {
            Err(Error::IllConditioned(_)) => {}
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = VehicleParams::default();
        let traces = quad_trace(&p, 0.0, 3);
        assert!(matches!(
            fit_params(VehicleKind::Quad, &traces[..20], &p),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn recovers_rover_axles() {
        let mut truth = VehicleParams::default();
        truth.axle_front = 0.26;
        truth.axle_rear = 0.17;
        let dt = 0.0025;
        let mut s = StateVector::zeros();
        s[idx::VX] = 1.0;
        let mut traces = Vec::new();
        for k in 0..400 {
            let t = k as f64 * dt;
            let u = ControlInput::Rover {
                accel: 0.5 * (2.0 * t).sin(),
                steer: 0.4 * (1.5 * t).sin(),
            };
            let next = step(VehicleKind::Rover, &s, &u, &truth, [0.0; 3], dt).unwrap();
            traces.push(Transition {
                state: s,
                control: u,
                next,
                dt,
            });
            s = next;
        }
        let base = VehicleParams::default();
        let (fit, _res) = fit_params(VehicleKind::Rover, &traces, &base).unwrap();
        assert!(((fit.axle_front - truth.axle_front) / truth.axle_front).abs() < 1e-5);
        assert!(((fit.axle_rear - truth.axle_rear) / truth.axle_rear).abs() < 1e-5);
    }
}
