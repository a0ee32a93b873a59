//! Robot models: the disturbed single integrator and the surface vessel.

use serde::{Deserialize, Serialize};

use crate::coordination::ControlOutput;
use crate::paths::ParametricPath;
use crate::{Error, Result};

/// Single-integrator robot together with its coordinate and estimator states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: Vec<f64>,
    pub omega: f64,
    pub omega_hat: f64,
    pub sigma_hat: f64,
    /// Disturbance estimate currently reported by the observer.
    pub d_hat: Vec<f64>,
    pub alive: bool,
}

impl RobotState {
    pub fn new(x: Vec<f64>, omega: f64) -> Self {
        let n = x.len();
        Self { x, omega, omega_hat: 0.0, sigma_hat: 0.0, d_hat: vec![0.0; n], alive: true }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.d_hat).all(|v| v.is_finite())
            && self.omega.is_finite()
            && self.omega_hat.is_finite()
            && self.sigma_hat.is_finite()
    }
}

/// `dx/dt = u + d`, `d omega/dt = u_omega`; zero for a dead robot.
pub fn robot_derivative(state: &RobotState, control: &ControlOutput, d: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = state.x.len();
    if control.u.len() != n || d.len() != n {
        return Err(Error::contract("control or disturbance has the wrong dimension"));
    }
    if !state.alive {
        return Ok((vec![0.0; n], 0.0));
    }
    let dx = control.u.iter().zip(d).map(|(u, d)| u + d).collect();
    Ok((dx, control.u_omega))
}

/// Time profile of the external disturbance, identical for every robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DisturbanceKind {
    None,
    Constant { value: Vec<f64> },
    /// `d_j(t) = amplitude_j sin(frequency_j t + phase_j)`, frequency in rad/s.
    Sinusoidal { amplitude: Vec<f64>, frequency: Vec<f64>, phase: Vec<f64> },
}

/// Disturbance profile with its declared bounds on `|d|` and `|d'|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

impl DisturbanceModel {
    pub fn none() -> Self {
        Self { kind: DisturbanceKind::None, beta1: None, beta2: None }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self { kind: DisturbanceKind::Constant { value }, beta1: None, beta2: None }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, DisturbanceKind::None)
    }

    /// Checks per-axis vector lengths against the path dimension and the
    /// declared bounds against [`Self::sup_norm`] and [`Self::sup_rate`].
    pub fn validate(&self, n: usize) -> Result<()> {
        let lens: Vec<usize> = match &self.kind {
            DisturbanceKind::None => vec![],
            DisturbanceKind::Constant { value } => vec![value.len()],
            DisturbanceKind::Sinusoidal { amplitude, frequency, phase } => {
                vec![amplitude.len(), frequency.len(), phase.len()]
            }
        };
        if lens.iter().any(|&l| l != n) {
            return Err(Error::config(format!("disturbance vectors must have length {n}")));
        }
        if let Some(b1) = self.beta1 {
            if self.sup_norm() > b1 {
                return Err(Error::config(format!(
                    "disturbance bound beta1 = {b1} is below sup |d| = {}",
                    self.sup_norm()
                )));
            }
        }
        if let Some(b2) = self.beta2 {
            if self.sup_rate() > b2 {
                return Err(Error::config(format!(
                    "disturbance bound beta2 = {b2} is below sup |d'| = {}",
                    self.sup_rate()
                )));
            }
        }
        Ok(())
    }

    /// Analytic upper bound on `|d(t)|`.
    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            DisturbanceKind::None => 0.0,
            DisturbanceKind::Constant { value } => value.iter().map(|v| v * v).sum::<f64>().sqrt(),
            DisturbanceKind::Sinusoidal { amplitude, .. } => {
                amplitude.iter().map(|a| a * a).sum::<f64>().sqrt()
            }
        }
    }

    /// Analytic upper bound on `|d'(t)|`.
    pub fn sup_rate(&self) -> f64 {
        match &self.kind {
            DisturbanceKind::Sinusoidal { amplitude, frequency, .. } => amplitude
                .iter()
                .zip(frequency)
                .map(|(a, w)| (a * w).powi(2))
                .sum::<f64>()
                .sqrt(),
            _ => 0.0,
        }
    }

    /// Writes `d(t)` into `out`.
    pub fn value_into(&self, t: f64, out: &mut [f64]) {
        match &self.kind {
            DisturbanceKind::None => out.fill(0.0),
            DisturbanceKind::Constant { value } => out.copy_from_slice(value),
            DisturbanceKind::Sinusoidal { amplitude, frequency, phase } => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = amplitude[j] * (frequency[j] * t + phase[j]).sin();
                }
            }
        }
    }

    pub fn value(&self, t: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.value_into(t, &mut out);
        out
    }
}

/// Idealised disturbance observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ObserverModel {
    Off,
    /// Exact estimate from `t1` on, zero before.
    PerfectAfter { t1: f64 },
    /// `d_hat = d + (d_hat0 - d) exp(-rate t)`.
    Exponential { rate: f64, initial: Vec<f64> },
}

impl ObserverModel {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ObserverModel::Off => Ok(()),
            ObserverModel::PerfectAfter { t1 } if *t1 >= 0.0 => Ok(()),
            ObserverModel::PerfectAfter { t1 } => {
                Err(Error::config(format!("observer settling time must be >= 0, got {t1}")))
            }
            ObserverModel::Exponential { rate, initial } => {
                if !(*rate > 0.0) {
                    return Err(Error::config("observer rate must be positive"));
                }
                if initial.len() != n {
                    return Err(Error::config(format!("observer initial estimate must have length {n}")));
                }
                Ok(())
            }
        }
    }
}

/// Disturbance estimate at time `t`.
pub fn observer_output(model: &ObserverModel, d_true: &[f64], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; d_true.len()];
    observer_output_into(model, d_true, t, &mut out);
    out
}

pub fn observer_output_into(model: &ObserverModel, d_true: &[f64], t: f64, out: &mut [f64]) {
    match model {
        ObserverModel::Off => out.fill(0.0),
        ObserverModel::PerfectAfter { t1 } => {
            if t >= *t1 {
                out.copy_from_slice(d_true);
            } else {
                out.fill(0.0);
            }
        }
        ObserverModel::Exponential { rate, initial } => {
            let decay = (-rate * t).exp();
            for j in 0..out.len() {
                out[j] = d_true[j] + (initial[j] - d_true[j]) * decay;
            }
        }
    }
}

/// Rates of the path error and the coordinate under a given input:
/// `d phi_j/dt = u_j + d_j - f'_j(omega) u_omega`, `d omega/dt = u_omega`.
pub fn error_dynamics_diagnostic(
    path: &ParametricPath,
    omega: f64,
    control: &ControlOutput,
    d: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = path.dim();
    if control.u.len() != n || d.len() != n {
        return Err(Error::contract("control or disturbance has the wrong dimension"));
    }
    let jet = path.jet(omega);
    let dphi = (0..n).map(|j| control.u[j] + d[j] - jet.d1[j] * control.u_omega).collect();
    Ok((dphi, control.u_omega))
}

/// Identified coefficients of the vessel surge, yaw and sway dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
    pub l7: f64,
    /// Symmetric saturation on `(tau1, tau2)`.
    pub tau_limit: Option<(f64, f64)>,
}

impl Default for UsvParams {
    /// Placeholder stable coefficients; override them with identified values.
    fn default() -> Self {
        Self { l1: -0.5, l2: 0.1, l3: 1.0, l4: -1.0, l5: 1.0, l6: -2.0, l7: 0.05, tau_limit: None }
    }
}

/// Planar vessel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvState {
    pub x: f64,
    pub y: f64,
    /// Heading, never wrapped.
    pub psi: f64,
    /// Surge speed.
    pub eps: f64,
    /// Sway speed.
    pub v: f64,
    pub r_yaw: f64,
    pub omega: f64,
    pub omega_hat: f64,
    pub sigma_hat: f64,
    pub alive: bool,
}

/// Time derivative of the mechanical part of a [`UsvState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UsvDerivative {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub eps: f64,
    pub r_yaw: f64,
    pub v: f64,
}

/// Body-to-world kinematics plus the surge, yaw and sway dynamics.
pub fn usv_derivative(state: &UsvState, tau: (f64, f64), p: &UsvParams) -> UsvDerivative {
    if !state.alive {
        return UsvDerivative::default();
    }
    let (t1, t2) = match p.tau_limit {
        Some((a, b)) => (tau.0.clamp(-a, a), tau.1.clamp(-b, b)),
        None => tau,
    };
    let (s, c) = state.psi.sin_cos();
    UsvDerivative {
        x: state.eps * c - state.v * s,
        y: state.eps * s + state.v * c,
        psi: state.r_yaw,
        eps: p.l1 * state.eps + p.l2 * state.v * state.r_yaw + p.l3 * t1,
        r_yaw: p.l4 * state.r_yaw + p.l5 * t2,
        v: p.l6 * state.v + p.l7 * state.eps * state.r_yaw,
    }
}

/// Low-level velocity tracking loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tracker", rename_all = "snake_case")]
pub enum TrackerMode {
    /// Surge and sway errors decay as `exp(-lambda t)` regardless of the hull model.
    IdealExponential { lambda: f64 },
    /// Feedback-linearised surge loop and a heading-rate loop; sway is unactuated.
    Proportional { k_surge: f64, k_yaw: f64 },
}

/// What a tracker asks the integrator to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackerOutput {
    Torques { tau1: f64, tau2: f64 },
    /// Rates of the surge and sway tracking errors.
    ErrorRates { d_eps: f64, d_v: f64 },
}

/// Tracker action for references `(eps_r, v_r)`.
///
/// In ideal mode `state.eps` and `state.v` are read as the tracking errors
/// `eps - eps_r` and `v - v_r`.
pub fn velocity_tracker(mode: &TrackerMode, state: &UsvState, eps_r: f64, v_r: f64, p: &UsvParams) -> TrackerOutput {
    match *mode {
        TrackerMode::IdealExponential { lambda } => TrackerOutput::ErrorRates {
            d_eps: -lambda * state.eps,
            d_v: -lambda * state.v,
        },
        TrackerMode::Proportional { k_surge, k_yaw } => {
            let tau1 = (-k_surge * (state.eps - eps_r) - p.l1 * state.eps - p.l2 * state.v * state.r_yaw) / p.l3;
            let r_des = v_r.atan2(eps_r);
            let tau2 = (-k_yaw * (state.r_yaw - r_des) - p.l4 * state.r_yaw) / p.l5;
            TrackerOutput::Torques { tau1, tau2 }
        }
    }
}

/// World-frame image of body-frame tracking errors.
pub fn rotate_errors(eps_tilde: f64, v_tilde: f64, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (eps_tilde * c - v_tilde * s, eps_tilde * s + v_tilde * c)
}

/// Heading-rate command used by the ideal tracker: turn towards the
/// reference velocity in the body frame.
pub fn ideal_yaw_rate(lambda: f64, eps_r: f64, v_r: f64) -> f64 {
    if eps_r == 0.0 && v_r == 0.0 {
        0.0
    } else {
        lambda * v_r.atan2(eps_r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn vessel() -> UsvState {
        UsvState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            eps: 0.0,
            v: 0.0,
            r_yaw: 0.0,
            omega: 0.0,
            omega_hat: 0.0,
            sigma_hat: 0.0,
            alive: true,
        }
    }

    #[test]
    fn integrator_examples() {
        let s = RobotState::new(vec![1.0, 2.0], 0.0);
        let zero = ControlOutput { u: vec![0.0, 0.0], u_omega: 0.0 };
        assert_eq!(robot_derivative(&s, &zero, &[0.0, 0.0]).unwrap(), (vec![0.0, 0.0], 0.0));
        let u = ControlOutput { u: vec![1.0, 0.0], u_omega: 0.5 };
        let (dx, dw) = robot_derivative(&s, &u, &[0.1, 0.1]).unwrap();
        assert_eq!(dx, vec![1.1, 0.1]);
        assert_eq!(dw, 0.5);
        let dead = RobotState { alive: false, ..s };
        assert_eq!(robot_derivative(&dead, &u, &[0.1, 0.1]).unwrap(), (vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn observer_examples() {
        let d = [1.0, 0.0];
        assert_eq!(observer_output(&ObserverModel::PerfectAfter { t1: 1.0 }, &d, 2.0), d.to_vec());
        assert_eq!(observer_output(&ObserverModel::PerfectAfter { t1: 1.0 }, &d, 0.5), vec![0.0, 0.0]);
        let exp = ObserverModel::Exponential { rate: 1.0, initial: vec![0.0, 0.0] };
        assert_eq!(observer_output(&exp, &d, 0.0), vec![0.0, 0.0]);
        assert!((observer_output(&exp, &d, 50.0)[0] - 1.0).abs() < 1e-12);
        assert_eq!(observer_output(&ObserverModel::Off, &[3.0, 3.0], 10.0), vec![0.0, 0.0]);
    }

    #[test]
    fn observer_validation() {
        assert!(ObserverModel::PerfectAfter { t1: -1.0 }.validate(2).is_err());
        assert!(ObserverModel::Exponential { rate: 0.0, initial: vec![0.0; 2] }.validate(2).is_err());
        assert!(ObserverModel::Exponential { rate: 1.0, initial: vec![0.0; 3] }.validate(2).is_err());
    }

    #[test]
    fn error_dynamics_examples() {
        let c = ParametricPath::unit_circle();
        let zero = ControlOutput { u: vec![0.0, 0.0], u_omega: 0.0 };
        assert_eq!(error_dynamics_diagnostic(&c, 0.3, &zero, &[0.0, 0.0]).unwrap(), (vec![0.0, 0.0], 0.0));
        let w = 0.3;
        let drift = ControlOutput { u: vec![0.0, 0.0], u_omega: 1.0 };
        let (dphi, dw) = error_dynamics_diagnostic(&c, w, &drift, &[0.0, 0.0]).unwrap();
        assert_eq!(dw, 1.0);
        assert!((dphi[0] - w.sin()).abs() < 1e-15);
        assert!((dphi[1] + w.cos()).abs() < 1e-15);
    }

    #[test]
    fn disturbance_bounds() {
        let d = DisturbanceModel { beta1: Some(0.2), ..DisturbanceModel::constant(vec![0.1, 0.1, 0.1]) };
        assert!(d.validate(3).is_ok());
        assert!(d.validate(2).is_err());
        let tight = DisturbanceModel { beta1: Some(0.1), ..d.clone() };
        assert!(tight.validate(3).is_err());
        let sine = DisturbanceModel {
            kind: DisturbanceKind::Sinusoidal {
                amplitude: vec![0.3, 0.4],
                frequency: vec![2.0, 1.0],
                phase: vec![0.0, 0.5],
            },
            beta1: Some(0.5),
            beta2: Some(0.75),
        };
        assert!(sine.validate(2).is_ok());
        assert!((sine.sup_rate() - (0.36f64 + 0.16).sqrt()).abs() < 1e-15);
        for i in 0..1000 {
            let v = sine.value(i as f64 * 0.01, 2);
            assert!(v.iter().map(|a| a * a).sum::<f64>().sqrt() <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn usv_examples() {
        let p = UsvParams::default();
        assert_eq!(usv_derivative(&vessel(), (0.0, 0.0), &p), UsvDerivative::default());

        let p1 = UsvParams { l1: -1.0, ..p };
        let d = usv_derivative(&UsvState { eps: 1.0, ..vessel() }, (0.0, 0.0), &p1);
        assert_eq!((d.x, d.y, d.psi, d.eps, d.r_yaw, d.v), (1.0, 0.0, 0.0, -1.0, 0.0, 0.0));

        let d = usv_derivative(&UsvState { eps: 1.0, psi: PI / 2.0, ..vessel() }, (0.0, 0.0), &p);
        assert!(d.x.abs() < 1e-15 && (d.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn torque_saturation() {
        let p = UsvParams { tau_limit: Some((1.0, 0.5)), ..UsvParams::default() };
        let d = usv_derivative(&vessel(), (5.0, -5.0), &p);
        assert_eq!(d.eps, 1.0);
        assert_eq!(d.r_yaw, -0.5);
    }

    #[test]
    fn tracker_examples() {
        let p = UsvParams::default();
        let ideal = TrackerMode::IdealExponential { lambda: 5.0 };
        let s = UsvState { eps: 1.0, ..vessel() };
        assert_eq!(velocity_tracker(&ideal, &s, 0.0, 0.0, &p), TrackerOutput::ErrorRates { d_eps: -5.0, d_v: 0.0 });
        assert_eq!(
            velocity_tracker(&ideal, &vessel(), 0.3, 0.2, &p),
            TrackerOutput::ErrorRates { d_eps: 0.0, d_v: 0.0 }
        );

        let bare = UsvParams { l1: 0.0, l2: 0.0, l3: 1.0, ..p };
        let prop = TrackerMode::Proportional { k_surge: 2.0, k_yaw: 1.0 };
        match velocity_tracker(&prop, &UsvState { eps: 1.0, ..vessel() }, 0.0, 0.0, &bare) {
            TrackerOutput::Torques { tau1, .. } => assert_eq!(tau1, -2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_rotation_preserves_norm() {
        let (e, v) = (0.7, -1.3);
        for k in 0..100 {
            let psi = -20.0 + 0.41 * k as f64;
            let (a, b) = rotate_errors(e, v, psi);
            assert!((a * a + b * b - (e * e + v * v)).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn rotation_round_trip(e in -5.0f64..5.0, v in -5.0f64..5.0, psi in -7.0f64..7.0) {
            let (a, b) = rotate_errors(e, v, psi);
            let (e2, v2) = rotate_errors(a, b, -psi);
            proptest::prop_assert!((e2 - e).abs() < 1e-12 && (v2 - v).abs() < 1e-12);
        }
    }
}
