//! Scenario configuration: the on-disk TOML layout and its validation.
//!
//! Robot ids are 1-based everywhere a user sees them (config, logs,
//! reports) and 0-based inside the engine.

use serde::{Deserialize, Serialize};

use crate::coordination::FixedOrdering;
use crate::dynamics::{DisturbanceKind, DisturbanceModel, ObserverModel, TrackerMode, UsvParams};
use crate::estimator::{gain_threshold, min_eigenvalue, TopologyGraph};
use crate::gvf::GainSet;
use crate::paths::{builtin_path, check_capacity, CheckStatus, ParametricPath, PathKind};
use crate::{Error, Result};

use super::init::{initial_conditions, InitialConditions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub path: PathSection,
    pub robots: RobotsSection,
    pub gains: GainsSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
    #[serde(default)]
    pub events: EventsSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub kind: PathKind,
    /// Overall size (circle radius, lissajous2d amplitude, lissajous3d factor).
    #[serde(default = "one")]
    pub scale: f64,
    /// lissajous2d denominator coefficient.
    #[serde(default)]
    pub squash: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotModel {
    Integrator,
    Usv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Dgvf,
    FixedOrdering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionInit {
    Explicit,
    /// Uniform in `[box_lo, box_hi]`.
    Box,
    /// `f(omega_i(0))` plus a uniform offset in `[-spread, spread]` per axis.
    AroundPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaInit {
    Explicit,
    /// Evenly spaced slots `omega_center + (slot - (N-1)/2) * omega_gap`.
    Spaced,
    /// Nearest path parameter to the initial position, then spread apart.
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracker {
    Ideal,
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotsSection {
    pub count: usize,
    #[serde(default = "default_model")]
    pub model: RobotModel,
    #[serde(default = "default_controller")]
    pub controller: Controller,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_positions")]
    pub positions: PositionInit,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_positions: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_omega_init")]
    pub omega_init: OmegaInit,
    /// Slot spacing for `spaced`; defaults to `(r + R) / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_gap: Option<f64>,
    #[serde(default)]
    pub omega_center: f64,
    /// Randomly permute the spaced slots.
    #[serde(default = "yes")]
    pub shuffle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_omega: Option<Vec<f64>>,
    /// Initial vessel headings in radians; random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headings: Option<Vec<f64>>,
    #[serde(default = "default_tracker")]
    pub tracker: Tracker,
    /// Ideal tracker decay rate (1/s).
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_k_surge")]
    pub k_surge: f64,
    #[serde(default = "default_k_yaw")]
    pub k_yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usv_params: Option<UsvParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k: Vec<f64>,
    pub c: f64,
    pub sensing_radius: f64,
    pub safe_radius: f64,
    /// Desired spacing between consecutive robots for the fixed-ordering baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_offset: Option<f64>,
    /// Per-robot overrides of `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_robot_k: Option<Vec<Vec<f64>>>,
    /// Per-robot overrides of `c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_robot_c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Complete,
    Path,
    Edges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorInit {
    /// `omega_hat = 0`, `sigma_hat = 0`.
    Zero,
    /// Start on the consensus manifold.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_gamma1")]
    pub gamma1: f64,
    #[serde(default = "default_gamma2")]
    pub gamma2: f64,
    #[serde(default = "default_topology")]
    pub topology: TopologyKind,
    /// 1-based undirected edges for `topology = "edges"`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
    /// 1-based ids of robots with access to the target coordinate.
    #[serde(default = "default_anchors")]
    pub anchors: Vec<usize>,
    #[serde(default)]
    pub omega_star0: f64,
    #[serde(default = "default_estimator_init")]
    pub init: EstimatorInit,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            gamma1: default_gamma1(),
            gamma2: default_gamma2(),
            topology: default_topology(),
            edges: Vec::new(),
            anchors: default_anchors(),
            omega_star0: 0.0,
            init: default_estimator_init(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceShape {
    None,
    Constant,
    Sinusoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    Off,
    PerfectAfter,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    #[serde(default = "default_disturbance")]
    pub kind: DisturbanceShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<f64>>,
    /// Angular frequency per axis (rad/s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Vec<f64>>,
    /// Declared bound on `|d|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    /// Declared bound on `|d'|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default = "default_observer")]
    pub observer: ObserverKind,
    /// Settling time of the `perfect_after` observer (s).
    #[serde(default)]
    pub t1: f64,
    /// Decay rate of the `exponential` observer (1/s).
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        Self {
            kind: DisturbanceShape::None,
            value: None,
            amplitude: None,
            frequency: None,
            phase: None,
            beta1: None,
            beta2: None,
            observer: ObserverKind::Off,
            t1: 0.0,
            rate: 1.0,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakdown {
    /// 1-based robot ids.
    pub robots: Vec<usize>,
    pub time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakdown: Vec<Breakdown>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Re-evaluate the law at every integrator stage.
    Continuous,
    /// Zero-order hold over `control_period`.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    /// Physics step (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_control")]
    pub control: ControlMode,
    /// Hold time of the sampled controller (s).
    #[serde(default = "default_control_period")]
    pub control_period: f64,
    /// Simulated time (s).
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Spacing of logged ticks (s); every step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_period: Option<f64>,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            integrator: default_integrator(),
            dt: default_dt(),
            control: default_control(),
            control_period: default_control_period(),
            duration: default_duration(),
            log_period: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_format")]
    pub format: LogFormat,
    /// Path-error tolerance for claim 1 (path units).
    #[serde(default = "default_eps")]
    pub eps_phi: f64,
    /// Rate tolerance for claim 2.
    #[serde(default = "default_eps")]
    pub eps_omega: f64,
    /// Trailing fraction of the run treated as steady state.
    #[serde(default = "default_steady")]
    pub steady_fraction: f64,
    #[serde(default = "default_band")]
    pub convergence_band: f64,
    /// Whether the scenario is expected to form a platoon; negative
    /// scenarios set this to false.
    #[serde(default = "yes")]
    pub expect_platoon: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            format: default_format(),
            eps_phi: default_eps(),
            eps_omega: default_eps(),
            steady_fraction: default_steady(),
            convergence_band: default_band(),
            expect_platoon: true,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_model() -> RobotModel {
    RobotModel::Integrator
}
fn default_controller() -> Controller {
    Controller::Dgvf
}
fn default_positions() -> PositionInit {
    PositionInit::AroundPath
}
fn default_spread() -> f64 {
    2.0
}
fn default_omega_init() -> OmegaInit {
    OmegaInit::Spaced
}
fn default_tracker() -> Tracker {
    Tracker::Ideal
}
fn default_lambda() -> f64 {
    5.0
}
fn default_k_surge() -> f64 {
    2.0
}
fn default_k_yaw() -> f64 {
    1.0
}
fn default_gamma1() -> f64 {
    20.0
}
fn default_gamma2() -> f64 {
    0.5
}
fn default_topology() -> TopologyKind {
    TopologyKind::Ring
}
fn default_anchors() -> Vec<usize> {
    vec![1]
}
fn default_estimator_init() -> EstimatorInit {
    EstimatorInit::Zero
}
fn default_disturbance() -> DisturbanceShape {
    DisturbanceShape::None
}
fn default_observer() -> ObserverKind {
    ObserverKind::Off
}
fn default_integrator() -> Integrator {
    Integrator::Rk4
}
fn default_dt() -> f64 {
    0.01
}
fn default_control() -> ControlMode {
    ControlMode::Sampled
}
fn default_control_period() -> f64 {
    0.1
}
fn default_duration() -> f64 {
    40.0
}
fn default_format() -> LogFormat {
    LogFormat::Csv
}
fn default_eps() -> f64 {
    1e-2
}
fn default_steady() -> f64 {
    0.2
}
fn default_band() -> f64 {
    0.1
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn n_robots(&self) -> usize {
        self.robots.count
    }

    pub fn build_path(&self) -> Result<ParametricPath> {
        builtin_path(self.path.kind, self.path.scale, self.path.squash)
    }

    /// Per-robot gain sets after applying overrides.
    pub fn gain_sets(&self) -> Result<Vec<GainSet>> {
        let n = self.robots.count;
        let g = &self.gains;
        let ks = match &g.per_robot_k {
            Some(v) if v.len() != n => {
                return Err(Error::config(format!("per_robot_k needs {n} entries, got {}", v.len())))
            }
            Some(v) => v.clone(),
            None => vec![g.k.clone(); n],
        };
        let cs = match &g.per_robot_c {
            Some(v) if v.len() != n => {
                return Err(Error::config(format!("per_robot_c needs {n} entries, got {}", v.len())))
            }
            Some(v) => v.clone(),
            None => vec![g.c; n],
        };
        let sets: Vec<GainSet> = ks
            .into_iter()
            .zip(cs)
            .map(|(k, c)| GainSet {
                k,
                c,
                sensing_radius: g.sensing_radius,
                safe_radius: g.safe_radius,
                gamma1: self.estimator.gamma1,
                gamma2: self.estimator.gamma2,
            })
            .collect();
        for s in &sets {
            s.validate()?;
        }
        Ok(sets)
    }

    /// Communication graph with 0-based node ids.
    pub fn topology(&self) -> Result<TopologyGraph> {
        let n = self.robots.count;
        let anchors = to_zero_based(&self.estimator.anchors, n, "anchor")?;
        match self.estimator.topology {
            TopologyKind::Ring => TopologyGraph::ring(n, &anchors),
            TopologyKind::Complete => TopologyGraph::complete(n, &anchors),
            TopologyKind::Path => TopologyGraph::path(n, &anchors),
            TopologyKind::Edges => {
                let mut edges = Vec::with_capacity(self.estimator.edges.len());
                for [a, b] in &self.estimator.edges {
                    let e = to_zero_based(&[*a, *b], n, "edge endpoint")?;
                    edges.push((e[0], e[1]));
                }
                TopologyGraph::from_edges(n, &edges, &anchors)
            }
        }
    }

    pub fn disturbance_model(&self) -> Result<DisturbanceModel> {
        let d = &self.disturbance;
        let dim = self.build_path()?.dim();
        let need = |v: &Option<Vec<f64>>, name: &str| {
            v.clone()
                .ok_or_else(|| Error::config(format!("disturbance {name} is required for this kind")))
        };
        let kind = match d.kind {
            DisturbanceShape::None => DisturbanceKind::None,
            DisturbanceShape::Constant => DisturbanceKind::Constant { value: need(&d.value, "value")? },
            DisturbanceShape::Sinusoidal => DisturbanceKind::Sinusoidal {
                amplitude: need(&d.amplitude, "amplitude")?,
                frequency: need(&d.frequency, "frequency")?,
                phase: d.phase.clone().unwrap_or_else(|| vec![0.0; dim]),
            },
        };
        let model = DisturbanceModel { kind, beta1: d.beta1, beta2: d.beta2 };
        model.validate(dim)?;
        Ok(model)
    }

    pub fn observer_model(&self) -> Result<ObserverModel> {
        let d = &self.disturbance;
        let dim = self.build_path()?.dim();
        let model = match d.observer {
            ObserverKind::Off => ObserverModel::Off,
            ObserverKind::PerfectAfter => ObserverModel::PerfectAfter { t1: d.t1 },
            ObserverKind::Exponential => ObserverModel::Exponential {
                rate: d.rate,
                initial: d.initial.clone().unwrap_or_else(|| vec![0.0; dim]),
            },
        };
        model.validate(dim)?;
        Ok(model)
    }

    pub fn tracker_mode(&self) -> TrackerMode {
        match self.robots.tracker {
            Tracker::Ideal => TrackerMode::IdealExponential { lambda: self.robots.lambda },
            Tracker::Proportional => TrackerMode::Proportional {
                k_surge: self.robots.k_surge,
                k_yaw: self.robots.k_yaw,
            },
        }
    }

    pub fn usv_params(&self) -> UsvParams {
        self.robots.usv_params.unwrap_or_default()
    }

    /// Chain in robot-index order with `fixed_offset` spacing.
    pub fn fixed_ordering(&self) -> Result<FixedOrdering> {
        let offset = self
            .gains
            .fixed_offset
            .ok_or_else(|| Error::config("fixed_ordering controller needs gains.fixed_offset"))?;
        Ok(FixedOrdering::chain(self.robots.count, offset))
    }

    /// Breakdown events as `(time, 0-based ids)`, sorted by time.
    pub fn breakdowns(&self) -> Result<Vec<(f64, Vec<usize>)>> {
        let n = self.robots.count;
        let mut out = Vec::new();
        for b in &self.events.breakdown {
            if !(b.time >= 0.0) || !b.time.is_finite() {
                return Err(Error::config(format!("breakdown time must be >= 0, got {}", b.time)));
            }
            out.push((b.time, to_zero_based(&b.robots, n, "breakdown robot")?));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }

    /// Checks that do not depend on the sampled initial state.
    pub fn check_structure(&self) -> Result<()> {
        let path = self.build_path()?;
        let n = path.dim();
        if self.robots.count == 0 {
            return Err(Error::config("robots.count must be at least 1"));
        }
        if self.gains.k.len() != n {
            return Err(Error::config(format!(
                "gains.k has {} entries but the path has dimension {n}",
                self.gains.k.len()
            )));
        }
        let g = &self.gains;
        if !(g.safe_radius > 0.0) || !(g.safe_radius < g.sensing_radius) {
            return Err(Error::config(format!(
                "radii must satisfy 0 < r < R (r = {}, R = {})",
                g.safe_radius, g.sensing_radius
            )));
        }
        self.gain_sets()?;
        let it = &self.integration;
        if !(it.dt > 0.0) || !(it.duration > 0.0) {
            return Err(Error::config("integration.dt and integration.duration must be positive"));
        }
        if it.duration < it.dt {
            return Err(Error::config("integration.duration is shorter than one step"));
        }
        if it.control == ControlMode::Sampled && !(it.control_period >= it.dt) {
            return Err(Error::config("integration.control_period must be at least integration.dt"));
        }
        if let Some(lp) = it.log_period {
            if !(lp >= it.dt) {
                return Err(Error::config("integration.log_period must be at least integration.dt"));
            }
        }
        let o = &self.output;
        if !(o.steady_fraction > 0.0 && o.steady_fraction <= 1.0) {
            return Err(Error::config("output.steady_fraction must lie in (0, 1]"));
        }
        if !(o.eps_phi > 0.0) || !(o.eps_omega > 0.0) || !(o.convergence_band > 0.0) {
            return Err(Error::config("output tolerances must be positive"));
        }
        if self.robots.model == RobotModel::Usv {
            if n != 2 {
                return Err(Error::config("the usv model needs a planar path"));
            }
            if self.robots.controller == Controller::FixedOrdering {
                return Err(Error::config("the fixed_ordering controller is only available for integrators"));
            }
            let ok = match self.tracker_mode() {
                TrackerMode::IdealExponential { lambda } => lambda > 0.0,
                TrackerMode::Proportional { k_surge, k_yaw } => k_surge > 0.0 && k_yaw > 0.0,
            };
            if !ok {
                return Err(Error::config("tracker gains must be positive"));
            }
            let p = self.usv_params();
            if p.l3 == 0.0 || p.l5 == 0.0 {
                return Err(Error::config("usv_params.l3 and l5 must be nonzero"));
            }
        }
        if self.robots.controller == Controller::FixedOrdering {
            self.fixed_ordering()?;
        }
        self.topology()?;
        self.disturbance_model()?;
        self.observer_model()?;
        self.breakdowns()?;
        Ok(())
    }
}

fn to_zero_based(ids: &[usize], n: usize, what: &str) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&id| {
            if id == 0 || id > n {
                Err(Error::config(format!("{what} id {id} outside 1..={n}")))
            } else {
                Ok(id - 1)
            }
        })
        .collect()
}

/// Outcome of one hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub id: String,
    pub status: CheckStatus,
    /// Hard failures abort a run; soft ones are reported and the run proceeds.
    pub hard: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn has_hard_failure(&self) -> bool {
        self.checks.iter().any(|c| c.hard && c.status == CheckStatus::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Warn => "warn",
                CheckStatus::Fail => "FAIL",
            };
            s.push_str(&format!("{:<3} {tag:<4} {}\n", c.id, c.message));
        }
        s
    }
}

/// Sampled `(sup |f'|, sup |f''|)` over one period (or `[-10, 10]` for open paths).
pub fn derivative_bounds(path: &ParametricPath, samples: usize) -> (f64, f64) {
    let (a, b) = match path.period() {
        Some(p) => (0.0, p),
        None => (-10.0, 10.0),
    };
    let mut s1: f64 = 0.0;
    let mut s2: f64 = 0.0;
    for i in 0..=samples {
        let jet = path.jet(a + (b - a) * i as f64 / samples as f64);
        s1 = s1.max(jet.d1.iter().map(|v| v * v).sum::<f64>().sqrt());
        s2 = s2.max(jet.d2.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    (s1, s2)
}

fn check(id: &str, status: CheckStatus, hard: bool, message: String) -> ConditionCheck {
    ConditionCheck { id: id.into(), status, hard, message }
}

/// Runs the five hypothesis checks on a parsed configuration.
///
/// Structural problems (bad dimensions, unknown ids, `r >= R`) are errors;
/// C1 failures are hard; C3 only warns and C4 failures are soft so that negative
/// scenarios can still run.
pub fn validate_config(cfg: &ScenarioConfig) -> Result<ValidationReport> {
    cfg.check_structure()?;
    let init = initial_conditions(cfg)?;
    let path = cfg.build_path()?;
    let mut checks = vec![check_c1(cfg, &init)];

    let (s1, s2) = derivative_bounds(&path, 4096);
    checks.push(if s1.is_finite() && s2.is_finite() {
        check("C2", CheckStatus::Pass, false, format!("sup|f'| = {s1:.6}, sup|f''| = {s2:.6}"))
    } else {
        check("C2", CheckStatus::Fail, true, "path derivatives are unbounded".into())
    });

    checks.push(check_c3(cfg)?);

    let cap = check_capacity(&path, cfg.n_robots(), cfg.gains.sensing_radius)?;
    checks.push(check("C4", cap.status, false, format!("{} (slack {:.4})", cap.note, cap.slack)));

    let d = &cfg.disturbance;
    checks.push(if d.kind == DisturbanceShape::None {
        check("C5", CheckStatus::Pass, false, "no disturbance".into())
    } else if d.beta1.is_some() && d.beta2.is_some() {
        check(
            "C5",
            CheckStatus::Pass,
            false,
            format!("declared bounds beta1 = {}, beta2 = {}", d.beta1.unwrap(), d.beta2.unwrap()),
        )
    } else {
        check("C5", CheckStatus::Warn, false, "disturbance bounds beta1/beta2 not declared".into())
    });
    Ok(ValidationReport { checks })
}

fn check_c1(cfg: &ScenarioConfig, init: &InitialConditions) -> ConditionCheck {
    let r = cfg.gains.safe_radius;
    let mut min_gap = f64::INFINITY;
    let mut min_dist = f64::INFINITY;
    let n = init.omega.len();
    for i in 0..n {
        for k in i + 1..n {
            min_gap = min_gap.min((init.omega[i] - init.omega[k]).abs());
            let d2: f64 = init.x[i].iter().zip(&init.x[k]).map(|(a, b)| (a - b).powi(2)).sum();
            min_dist = min_dist.min(d2.sqrt());
        }
    }
    if n < 2 {
        return check("C1", CheckStatus::Pass, true, "single robot".into());
    }
    if min_gap > r && min_dist > 0.0 {
        check(
            "C1",
            CheckStatus::Pass,
            true,
            format!("min initial coordinate gap {min_gap:.4} > r = {r}, min distance {min_dist:.4}"),
        )
    } else {
        check(
            "C1",
            CheckStatus::Fail,
            true,
            format!("min initial coordinate gap {min_gap:.4} (r = {r}), min distance {min_dist:.4}"),
        )
    }
}

fn check_c3(cfg: &ScenarioConfig) -> Result<ConditionCheck> {
    if cfg.robots.controller == Controller::FixedOrdering {
        return Ok(check("C3", CheckStatus::Pass, false, "estimator unused by the fixed-ordering baseline".into()));
    }
    let topo = cfg.topology()?;
    let (g1, g2) = (cfg.estimator.gamma1, cfg.estimator.gamma2);
    if !topo.is_connected() || !topo.has_anchor() {
        return Ok(check(
            "C3",
            CheckStatus::Warn,
            false,
            "communication graph is disconnected or has no anchor".into(),
        ));
    }
    let lambda = min_eigenvalue(&topo)?;
    if !(g2 > 0.0 && g2 < 1.0) {
        return Ok(check(
            "C3",
            CheckStatus::Warn,
            false,
            format!("estimator gain gamma2 = {g2} violates 0 < gamma2 < 1 (smallest eigenvalue of L+B {lambda:.6})"),
        ));
    }
    let thr = gain_threshold(g2, lambda);
    Ok(if g1 > thr {
        check(
            "C3",
            CheckStatus::Pass,
            false,
            format!("gamma1 = {g1} > {thr:.4} (smallest eigenvalue of L+B {lambda:.6}), gamma2 = {g2}"),
        )
    } else {
        check(
            "C3",
            CheckStatus::Warn,
            false,
            format!("gamma1 = {g1} does not exceed {thr:.4} (smallest eigenvalue of L+B {lambda:.6})"),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[path]
kind = "circle"

[robots]
count = 3

[gains]
k = [1.0, 1.0]
c = 1.0
sensing_radius = 1.0
safe_radius = 0.7
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.integration.dt, 0.01);
        assert_eq!(cfg.estimator.anchors, vec![1]);
        assert_eq!(cfg.robots.omega_init, OmegaInit::Spaced);
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("c = 1.0", "c = 1.0\nkk = 2.0");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::TomlDe(_))));
    }

    #[test]
    fn ids_are_one_based() {
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.events.breakdown = vec![Breakdown { robots: vec![3, 1], time: 2.0 }];
        assert_eq!(cfg.breakdowns().unwrap(), vec![(2.0, vec![2, 0])]);
        cfg.events.breakdown[0].robots = vec![0];
        assert!(cfg.breakdowns().is_err());
        cfg.events.breakdown.clear();
        cfg.estimator.anchors = vec![4];
        assert!(cfg.topology().is_err());
    }

    #[test]
    fn structural_errors() {
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.gains.k = vec![1.0; 3];
        assert!(cfg.check_structure().is_err());
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.gains.safe_radius = 1.0;
        assert!(cfg.check_structure().is_err());
    }

    #[test]
    fn non_compliant_estimator_gain_only_warns() {
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.estimator.gamma2 = 4.0;
        let rep = validate_config(&cfg).unwrap();
        assert_eq!(rep.get("C3").unwrap().status, CheckStatus::Warn);
        assert!(!rep.has_hard_failure());
    }

    #[test]
    fn overlapping_coordinates_fail_hard() {
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.robots.omega_init = OmegaInit::Explicit;
        cfg.robots.explicit_omega = Some(vec![0.0, 0.5, 2.0]);
        let rep = validate_config(&cfg).unwrap();
        let c1 = rep.get("C1").unwrap();
        assert!(c1.hard && c1.status == CheckStatus::Fail);
        assert!(rep.has_hard_failure());
    }

    #[test]
    fn capacity_and_disturbance_checks() {
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.robots.count = 7;
        cfg.robots.omega_gap = Some(0.85);
        let rep = validate_config(&cfg).unwrap();
        assert_eq!(rep.get("C4").unwrap().status, CheckStatus::Fail);
        assert!(!rep.has_hard_failure());

        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.disturbance.kind = DisturbanceShape::Constant;
        cfg.disturbance.value = Some(vec![0.1, 0.1]);
        assert_eq!(validate_config(&cfg).unwrap().get("C5").unwrap().status, CheckStatus::Warn);
        cfg.disturbance.beta1 = Some(0.2);
        cfg.disturbance.beta2 = Some(0.0);
        assert_eq!(validate_config(&cfg).unwrap().get("C5").unwrap().status, CheckStatus::Pass);
    }
}
