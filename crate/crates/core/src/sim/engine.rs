//! Fixed-step integration of a whole team, its estimator and the target.

use crate::analysis::lyapunov_diagnostics;
use crate::coordination::{field_terms, pair_repulsion, target_rate, FixedOrdering};
use crate::dynamics::{
    ideal_yaw_rate, observer_output_into, usv_derivative, velocity_tracker, DisturbanceModel,
    ObserverModel, TrackerMode, TrackerOutput, UsvParams, UsvState,
};
use crate::estimator::{innovation, TopologyGraph};
use crate::gvf::GainSet;
use crate::paths::{CheckStatus, ParametricPath};
use crate::{Error, Result};

use super::config::{
    validate_config, ControlMode, Controller, EstimatorInit, Integrator, RobotModel, ScenarioConfig,
};
use super::init::initial_conditions;
use super::log::{LogEvent, RobotRecord, RunStats, Tick, TrajectoryLog};

/// Everything the right-hand side reads but never writes.
struct Model {
    path: ParametricPath,
    dim: usize,
    n: usize,
    model: RobotModel,
    controller: Controller,
    gains: Vec<GainSet>,
    r: f64,
    big_r: f64,
    base_topo: TopologyGraph,
    topo: TopologyGraph,
    fixed: Option<FixedOrdering>,
    disturbance: DisturbanceModel,
    observer: ObserverModel,
    tracker: TrackerMode,
    usv: UsvParams,
    alive: Vec<bool>,
    rate: f64,
    omega_star0: f64,
    stride: usize,
    /// Offset of `omega` inside a robot's state block (`omega_hat`, `sigma_hat` follow).
    oi: usize,
}

/// Controls of the whole team at one evaluation.
#[derive(Debug, Clone)]
struct Controls {
    /// Position command per robot; `(eps_r, v_r)` for vessels.
    u: Vec<f64>,
    u_omega: Vec<f64>,
    eta: Vec<f64>,
    neighbors: Vec<usize>,
    clamps: usize,
    eta_sum: f64,
}

impl Controls {
    fn new(n: usize, dim: usize) -> Self {
        Self {
            u: vec![0.0; n * dim],
            u_omega: vec![0.0; n],
            eta: vec![0.0; n],
            neighbors: vec![0; n],
            clamps: 0,
            eta_sum: 0.0,
        }
    }
}

/// Scratch buffers reused across evaluations.
struct Workspace {
    ctl: Controls,
    value: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d: Vec<f64>,
    d_hat: Vec<f64>,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Model {
    fn omega_star(&self, t: f64) -> f64 {
        self.omega_star0 + self.rate * t
    }

    fn omega_of(&self, y: &[f64], i: usize) -> f64 {
        y[i * self.stride + self.oi]
    }

    /// Evaluates every robot's law at `(t, y)`.
    fn controls(&self, t: f64, y: &[f64], ws: &mut Workspace) {
        let (n, dim, s, oi) = (self.n, self.dim, self.stride, self.oi);
        let ctl = &mut ws.ctl;
        ctl.clamps = 0;
        ctl.eta.fill(0.0);
        ctl.neighbors.fill(0);
        for i in 0..n {
            if !self.alive[i] {
                continue;
            }
            let wi = y[i * s + oi];
            for k in 0..n {
                if k == i || !self.alive[k] {
                    continue;
                }
                let diff = wi - y[k * s + oi];
                if diff.abs() < self.big_r {
                    ctl.neighbors[i] += 1;
                    if self.controller == Controller::Dgvf {
                        let (term, hit) = pair_repulsion(diff, self.r, self.big_r);
                        ctl.eta[i] += term;
                        ctl.clamps += hit as usize;
                    }
                }
            }
        }
        // Each hit was counted once from each side of the pair.
        ctl.clamps /= 2;
        ctl.eta_sum = ctl.eta.iter().sum();

        self.disturbance.value_into(t, &mut ws.d);
        observer_output_into(&self.observer, &ws.d, t, &mut ws.d_hat);

        for i in 0..n {
            let u = &mut ctl.u[i * dim..(i + 1) * dim];
            if !self.alive[i] {
                u.fill(0.0);
                ctl.u_omega[i] = 0.0;
                continue;
            }
            let b = &y[i * s..(i + 1) * s];
            let (w, w_hat) = (b[oi], b[oi + 1]);
            let g = &self.gains[i];
            self.path.jet_into(w, &mut ws.value, &mut ws.d1, &mut ws.d2);
            let last = field_terms(&ws.value, &ws.d1, &b[..dim], &g.k, u);
            // The observer estimate is subtracted to cancel the disturbance.
            for (uj, dj) in u.iter_mut().zip(&ws.d_hat) {
                *uj -= dj;
            }
            ctl.u_omega[i] = match self.controller {
                Controller::Dgvf => last - g.c * (w - w_hat) + ctl.eta[i],
                Controller::FixedOrdering => {
                    let links = &self.fixed.as_ref().expect("fixed ordering configured").links[i];
                    last + links.iter().map(|&(j, delta)| (self.omega_of(y, j) - w) - delta).sum::<f64>()
                }
            };
            if self.model == RobotModel::Usv {
                let (sn, cs) = b[2].sin_cos();
                let (ux, uy) = (u[0], u[1]);
                u[0] = ux * cs + uy * sn;
                u[1] = -ux * sn + uy * cs;
            }
        }
    }

    fn vessel(&self, b: &[f64], alive: bool) -> UsvState {
        UsvState {
            x: b[0],
            y: b[1],
            psi: b[2],
            eps: b[3],
            v: b[4],
            r_yaw: b[5],
            omega: b[6],
            omega_hat: b[7],
            sigma_hat: b[8],
            alive,
        }
    }

    /// Right-hand side given the controls in `ctl`.
    fn derivative(&self, t: f64, y: &[f64], ctl: &Controls, d: &mut [f64], dy: &mut [f64]) {
        let (n, dim, s, oi) = (self.n, self.dim, self.stride, self.oi);
        self.disturbance.value_into(t, d);
        let ws = self.omega_star(t);
        let omega_hat: Vec<f64> = (0..n).map(|i| y[i * s + oi + 1]).collect();
        for i in 0..n {
            let b = &y[i * s..(i + 1) * s];
            let db = &mut dy[i * s..(i + 1) * s];
            if !self.alive[i] {
                db.fill(0.0);
                continue;
            }
            let u = &ctl.u[i * dim..(i + 1) * dim];
            match self.model {
                RobotModel::Integrator => {
                    for j in 0..dim {
                        db[j] = u[j] + d[j];
                    }
                }
                RobotModel::Usv => {
                    let (eps_r, v_r) = (u[0], u[1]);
                    let st = self.vessel(b, true);
                    match velocity_tracker(&self.tracker, &st, eps_r, v_r, &self.usv) {
                        TrackerOutput::ErrorRates { d_eps, d_v } => {
                            let lambda = match self.tracker {
                                TrackerMode::IdealExponential { lambda } => lambda,
                                TrackerMode::Proportional { .. } => unreachable!(),
                            };
                            let (eps, v) = (eps_r + b[3], v_r + b[4]);
                            let (sn, cs) = b[2].sin_cos();
                            db[0] = eps * cs - v * sn + d[0];
                            db[1] = eps * sn + v * cs + d[1];
                            db[2] = ideal_yaw_rate(lambda, eps_r, v_r);
                            db[3] = d_eps;
                            db[4] = d_v;
                            db[5] = 0.0;
                        }
                        TrackerOutput::Torques { tau1, tau2 } => {
                            let dd = usv_derivative(&st, (tau1, tau2), &self.usv);
                            db[0] = dd.x + d[0];
                            db[1] = dd.y + d[1];
                            db[2] = dd.psi;
                            db[3] = dd.eps;
                            db[4] = dd.v;
                            db[5] = dd.r_yaw;
                        }
                    }
                }
            }
            db[oi] = ctl.u_omega[i];
            let g = &self.gains[i];
            let inn = innovation(&omega_hat, ws, &self.topo, i);
            db[oi + 1] = g.gamma1 * inn + b[oi + 2];
            db[oi + 2] = g.gamma1 * g.gamma2 * inn;
        }
    }
}

/// A running scenario.
pub struct Simulation {
    m: Model,
    ws: Workspace,
    y: Vec<f64>,
    step: usize,
    dt: f64,
    steps: usize,
    integrator: Integrator,
    control: ControlMode,
    hold_steps: usize,
    log_every: usize,
    held: Option<Controls>,
    breakdowns: Vec<(f64, Vec<usize>)>,
    next_event: usize,
    log: TrajectoryLog,
    clamps_since_tick: usize,
}

impl Simulation {
    /// Builds the engine; fails on structural errors and hard check failures.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let report = validate_config(cfg)?;
        if report.has_hard_failure() {
            return Err(Error::config(format!("scenario fails a hard check:\n{}", report.render())));
        }
        let path = cfg.build_path()?;
        let dim = path.dim();
        let n = cfg.n_robots();
        let model = cfg.robots.model;
        let (stride, oi) = match model {
            RobotModel::Integrator => (dim + 3, dim),
            RobotModel::Usv => (9, 6),
        };
        let base_topo = cfg.topology()?;
        let m = Model {
            dim,
            n,
            model,
            controller: cfg.robots.controller,
            gains: cfg.gain_sets()?,
            r: cfg.gains.safe_radius,
            big_r: cfg.gains.sensing_radius,
            topo: base_topo.clone(),
            base_topo,
            fixed: match cfg.robots.controller {
                Controller::FixedOrdering => Some(cfg.fixed_ordering()?),
                Controller::Dgvf => None,
            },
            disturbance: cfg.disturbance_model()?,
            observer: cfg.observer_model()?,
            tracker: cfg.tracker_mode(),
            usv: cfg.usv_params(),
            alive: vec![true; n],
            rate: target_rate(dim),
            omega_star0: cfg.estimator.omega_star0,
            stride,
            oi,
            path,
        };
        let total = n * stride;
        let mut ws = Workspace {
            ctl: Controls::new(n, dim),
            value: vec![0.0; dim],
            d1: vec![0.0; dim],
            d2: vec![0.0; dim],
            d: vec![0.0; dim],
            d_hat: vec![0.0; dim],
            k: [vec![0.0; total], vec![0.0; total], vec![0.0; total], vec![0.0; total]],
            stage: vec![0.0; total],
        };

        let init = initial_conditions(cfg)?;
        let mut y = vec![0.0; total];
        for i in 0..n {
            let b = &mut y[i * stride..(i + 1) * stride];
            b[..dim].copy_from_slice(&init.x[i]);
            if model == RobotModel::Usv {
                b[2] = init.psi[i];
            }
            b[oi] = init.omega[i];
            if cfg.estimator.init == EstimatorInit::Exact {
                b[oi + 1] = m.omega_star0;
                b[oi + 2] = m.rate;
            }
        }
        if model == RobotModel::Usv {
            if let TrackerMode::IdealExponential { .. } = m.tracker {
                // Vessels start at rest, so the initial tracking error is
                // minus the initial reference.
                m.controls(0.0, &y, &mut ws);
                for i in 0..n {
                    y[i * stride + 3] = -ws.ctl.u[i * dim];
                    y[i * stride + 4] = -ws.ctl.u[i * dim + 1];
                }
            }
        }

        let it = &cfg.integration;
        let dt = it.dt;
        let steps = (it.duration / dt).round() as usize;
        let hold_steps = ((it.control_period / dt).round() as usize).max(1);
        let log_every = it.log_period.map_or(1, |p| ((p / dt).round() as usize).max(1));
        let mut events: Vec<LogEvent> = report
            .checks
            .iter()
            .filter(|c| c.status != CheckStatus::Pass)
            .map(|c| LogEvent { t: 0.0, kind: "check".into(), message: format!("{}: {}", c.id, c.message) })
            .collect();
        events.shrink_to_fit();
        Ok(Self {
            log: TrajectoryLog { dim, n_robots: n, ticks: Vec::new(), events, stats: RunStats::default() },
            m,
            ws,
            y,
            step: 0,
            dt,
            steps,
            integrator: it.integrator,
            control: it.control,
            hold_steps,
            log_every,
            held: None,
            breakdowns: cfg.breakdowns()?,
            next_event: 0,
            clamps_since_tick: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn alive(&self) -> &[bool] {
        &self.m.alive
    }

    /// Current coordinate of every robot.
    pub fn omegas(&self) -> Vec<f64> {
        (0..self.m.n).map(|i| self.m.omega_of(&self.y, i)).collect()
    }

    /// Current position of every robot.
    pub fn positions(&self) -> Vec<Vec<f64>> {
        let (s, dim) = (self.m.stride, self.m.dim);
        (0..self.m.n).map(|i| self.y[i * s..i * s + dim].to_vec()).collect()
    }

    /// Current estimator state of robot `i` as `(omega_hat, sigma_hat)`.
    pub fn estimate(&self, i: usize) -> (f64, f64) {
        let b = i * self.m.stride + self.m.oi;
        (self.y[b + 1], self.y[b + 2])
    }

    /// Communication graph currently in use.
    pub fn topology(&self) -> &TopologyGraph {
        &self.m.topo
    }

    /// Marks `ids` (0-based) as broken: their state freezes, and survivors
    /// drop them from sensing and from the communication graph.
    pub fn apply_breakdown(&mut self, ids: &[usize], t: f64) -> Result<()> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.m.n) {
            return Err(Error::config(format!("breakdown robot {} does not exist", bad + 1)));
        }
        for &i in ids {
            self.m.alive[i] = false;
        }
        self.m.topo = self.m.base_topo.without(&self.m.alive);
        let names: Vec<String> = ids.iter().map(|i| (i + 1).to_string()).collect();
        self.log.events.push(LogEvent {
            t,
            kind: "breakdown".into(),
            message: format!("robots {} stop", names.join(", ")),
        });
        if self.m.controller == Controller::Dgvf {
            let survivors = self.m.base_topo.induced(&self.m.alive);
            if !survivors.is_empty() && (!survivors.is_connected() || !survivors.has_anchor()) {
                self.log.events.push(LogEvent {
                    t,
                    kind: "warning".into(),
                    message: "survivor communication graph is disconnected or lost its anchor".into(),
                });
            }
        }
        Ok(())
    }

    fn record_eval(&mut self) {
        let ctl = &self.ws.ctl;
        self.log.stats.clamp_events += ctl.clamps;
        self.clamps_since_tick += ctl.clamps;
        self.log.stats.max_abs_eta_sum = self.log.stats.max_abs_eta_sum.max(ctl.eta_sum.abs());
    }

    fn eval(&mut self, t: f64, which: usize, from_stage: bool) {
        let y = if from_stage { &self.ws.stage } else { &self.y };
        match self.control {
            ControlMode::Continuous => {
                // Split borrows: the stage buffer is only read here.
                let y = y.clone();
                self.m.controls(t, &y, &mut self.ws);
                self.record_eval();
                let mut k = std::mem::take(&mut self.ws.k[which]);
                let mut d = std::mem::take(&mut self.ws.d);
                self.m.derivative(t, &y, &self.ws.ctl, &mut d, &mut k);
                self.ws.d = d;
                self.ws.k[which] = k;
            }
            ControlMode::Sampled => {
                let held = self.held.as_ref().expect("held controls set at the control tick");
                let mut k = std::mem::take(&mut self.ws.k[which]);
                let mut d = std::mem::take(&mut self.ws.d);
                self.m.derivative(t, y, held, &mut d, &mut k);
                self.ws.d = d;
                self.ws.k[which] = k;
            }
        }
    }

    fn set_stage(&mut self, which: usize, h: f64) {
        for ((s, y), k) in self.ws.stage.iter_mut().zip(&self.y).zip(&self.ws.k[which]) {
            *s = y + h * k;
        }
    }

    /// Advances one physics step.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        let dt = self.dt;
        while self.next_event < self.breakdowns.len() && self.breakdowns[self.next_event].0 <= t + 0.5 * dt {
            let ids = self.breakdowns[self.next_event].1.clone();
            self.apply_breakdown(&ids, t)?;
            self.next_event += 1;
        }
        if self.control == ControlMode::Sampled && (self.held.is_none() || self.step % self.hold_steps == 0) {
            let y = self.y.clone();
            self.m.controls(t, &y, &mut self.ws);
            self.record_eval();
            self.held = Some(self.ws.ctl.clone());
        }
        match self.integrator {
            Integrator::Euler => {
                self.eval(t, 0, false);
                for (y, k) in self.y.iter_mut().zip(&self.ws.k[0]) {
                    *y += dt * k;
                }
            }
            Integrator::Rk4 => {
                self.eval(t, 0, false);
                self.set_stage(0, 0.5 * dt);
                self.eval(t + 0.5 * dt, 1, true);
                self.set_stage(1, 0.5 * dt);
                self.eval(t + 0.5 * dt, 2, true);
                self.set_stage(2, dt);
                self.eval(t + dt, 3, true);
                let [k1, k2, k3, k4] = &self.ws.k;
                for (i, y) in self.y.iter_mut().enumerate() {
                    *y += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        self.step += 1;
        let s = self.m.stride;
        if let Some(bad) = (0..self.m.n).find(|&i| self.y[i * s..(i + 1) * s].iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric {
                tick: self.step,
                time: self.time(),
                robot: bad + 1,
                what: "state became non-finite".into(),
            });
        }
        Ok(())
    }

    /// Appends a log tick for the current state.
    fn log_tick(&mut self) -> Result<()> {
        let t = self.time();
        let m = &self.m;
        let ctl = match (&self.control, &self.held) {
            (ControlMode::Sampled, Some(h)) => h.clone(),
            _ => {
                let y = self.y.clone();
                m.controls(t, &y, &mut self.ws);
                self.ws.ctl.clone()
            }
        };
        let (s, dim, oi) = (m.stride, m.dim, m.oi);
        let mut robots = Vec::with_capacity(m.n);
        let mut xs = Vec::with_capacity(m.n);
        let mut omegas = Vec::with_capacity(m.n);
        let mut omega_hats = Vec::with_capacity(m.n);
        for i in 0..m.n {
            let b = &self.y[i * s..(i + 1) * s];
            let x = b[..dim].to_vec();
            let f = m.path.eval(b[oi]);
            robots.push(RobotRecord {
                alive: m.alive[i],
                phi: x.iter().zip(&f).map(|(a, b)| a - b).collect(),
                x: x.clone(),
                omega: b[oi],
                omega_hat: b[oi + 1],
                u: ctl.u[i * dim..(i + 1) * dim].to_vec(),
                u_omega: ctl.u_omega[i],
                eta: ctl.eta[i],
                neighbors: ctl.neighbors[i],
            });
            xs.push(x);
            omegas.push(b[oi]);
            omega_hats.push(b[oi + 1]);
        }
        let mut min_gap: Option<f64> = None;
        let mut min_distance: Option<f64> = None;
        for i in 0..m.n {
            for k in i + 1..m.n {
                if m.alive[i] && m.alive[k] {
                    let g = (omegas[i] - omegas[k]).abs();
                    min_gap = Some(min_gap.map_or(g, |v| v.min(g)));
                    let d = xs[i].iter().zip(&xs[k]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    min_distance = Some(min_distance.map_or(d, |v| v.min(d)));
                }
            }
        }
        let lyap = lyapunov_diagnostics(
            &m.path,
            &xs,
            &omegas,
            &omega_hats,
            &m.alive,
            m.omega_star(t),
            &m.gains,
            m.r,
            m.big_r,
        )
        .ok();
        self.log.ticks.push(Tick {
            t,
            omega_star: m.omega_star(t),
            v: lyap.as_ref().map(|l| l.v),
            dissipation: lyap.as_ref().map(|l| l.dissipation),
            min_gap,
            min_distance,
            eta_sum: ctl.eta_sum,
            clamps: self.clamps_since_tick,
            robots,
        });
        self.clamps_since_tick = 0;
        Ok(())
    }

    /// Runs to the configured duration and returns the log.
    pub fn run(mut self) -> Result<TrajectoryLog> {
        self.log_tick()?;
        while self.step < self.steps {
            self.step()?;
            if self.step % self.log_every == 0 {
                self.log_tick()?;
            }
        }
        self.log.stats.steps = self.step;
        Ok(self.log)
    }
}

/// Validates, integrates and logs a scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    Simulation::new(cfg)?.run()
}
