//! Bundled scenarios.

use std::f64::consts::PI;

use crate::dynamics::DisturbanceModel;
use crate::paths::PathKind;
use crate::sim::config::{
    Breakdown, ControlMode, Controller, DisturbanceSection, DisturbanceShape, EstimatorSection, EventsSection,
    GainsSection, IntegrationSection, OmegaInit, OutputSection, PathSection, PositionInit, RobotModel,
    RobotsSection, ScenarioConfig, Tracker,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Deliberately expected not to form a platoon.
    pub negative: bool,
    pub config: ScenarioConfig,
}

pub const PRESET_NAMES: [&str; 8] = [
    "circle-usv-3",
    "lissajous2d-usv-3",
    "lissajous3d-10",
    "breakdown-10",
    "fixed-ordering-breakdown-10",
    "disturbance-0.1",
    "disturbance-1",
    "disturbance-3",
];

fn robots(count: usize, model: RobotModel) -> RobotsSection {
    RobotsSection {
        count,
        model,
        controller: Controller::Dgvf,
        seed: 1,
        positions: PositionInit::AroundPath,
        spread: 2.0,
        box_lo: None,
        box_hi: None,
        explicit_positions: None,
        omega_init: OmegaInit::Spaced,
        omega_gap: None,
        omega_center: 0.0,
        shuffle: true,
        explicit_omega: None,
        headings: None,
        tracker: Tracker::Ideal,
        lambda: 5.0,
        k_surge: 2.0,
        k_yaw: 1.0,
        usv_params: None,
    }
}

fn gains(k: Vec<f64>, c: f64, sensing_radius: f64, safe_radius: f64) -> GainsSection {
    GainsSection { k, c, sensing_radius, safe_radius, fixed_offset: None, per_robot_k: None, per_robot_c: None }
}

fn integration(dt: f64, duration: f64) -> IntegrationSection {
    IntegrationSection {
        dt,
        control: ControlMode::Continuous,
        duration,
        log_period: Some(0.01),
        ..IntegrationSection::default()
    }
}

/// Three surface vessels on a path given in metres.
fn usv3(kind: PathKind, squash: f64, k: f64) -> ScenarioConfig {
    ScenarioConfig {
        path: PathSection { kind, scale: 0.8, squash },
        robots: RobotsSection { spread: 0.3, ..robots(3, RobotModel::Usv) },
        gains: gains(vec![k, k], 2.0, 1.0, 0.7),
        estimator: EstimatorSection::default(),
        disturbance: DisturbanceSection::default(),
        events: EventsSection::default(),
        integration: integration(1e-3, 60.0),
        output: OutputSection { eps_phi: 0.1, ..OutputSection::default() },
    }
}

fn lissajous3d_10() -> ScenarioConfig {
    ScenarioConfig {
        path: PathSection { kind: PathKind::Lissajous3d, scale: 1.0, squash: 0.0 },
        robots: RobotsSection { omega_gap: Some(0.5), ..robots(10, RobotModel::Integrator) },
        gains: gains(vec![0.6; 3], 3.0, 0.6, 0.4),
        estimator: EstimatorSection::default(),
        disturbance: DisturbanceSection::default(),
        events: EventsSection::default(),
        integration: integration(1e-3, 40.0),
        output: OutputSection::default(),
    }
}

fn breakdown(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.events.breakdown = vec![Breakdown { robots: vec![2, 3, 4, 5], time: 2.0 }];
    cfg.integration.duration = 60.0;
    cfg
}

fn disturbance(d: f64) -> ScenarioConfig {
    let mut cfg = lissajous3d_10();
    cfg.disturbance = DisturbanceSection {
        kind: DisturbanceShape::Constant,
        value: Some(vec![d; 3]),
        beta1: Some(DisturbanceModel::constant(vec![d; 3]).sup_norm()),
        beta2: Some(0.0),
        ..DisturbanceSection::default()
    };
    // Without compensation a constant disturbance leaves a steady offset of
    // order d / k, so claim 1 is judged against a looser band.
    cfg.output.eps_phi = 0.5;
    cfg.output.eps_omega = 0.05;
    cfg.output.expect_platoon = d < 1.0;
    cfg
}

/// Looks up a bundled scenario by name.
pub fn preset(name: &str) -> Result<Preset> {
    let (description, negative, config) = match name {
        "circle-usv-3" => ("3 vessels, circle of radius 0.8 m, ideal velocity tracking", false, usv3(PathKind::Circle, 0.0, 3.5)),
        "lissajous2d-usv-3" => (
            "3 vessels, planar Lissajous curve (0.8 m, squash 0.3), ideal velocity tracking",
            false,
            usv3(PathKind::Lissajous2d, 0.3, 2.0),
        ),
        "lissajous3d-10" => ("10 integrator robots on the 3D Lissajous curve", false, lissajous3d_10()),
        "breakdown-10" => ("lissajous3d-10 with robots 2-5 stopping at t = 2 s", false, breakdown(lissajous3d_10())),
        "fixed-ordering-breakdown-10" => {
            let mut cfg = breakdown(lissajous3d_10());
            cfg.robots.controller = Controller::FixedOrdering;
            cfg.robots.shuffle = false;
            cfg.robots.omega_gap = Some(2.0 * PI / 15.0);
            cfg.gains.fixed_offset = Some(2.0 * PI / 15.0);
            cfg.output.expect_platoon = false;
            ("breakdown-10 under a fixed-ordering coordination law", true, cfg)
        }
        "disturbance-0.1" => ("lissajous3d-10 with d = 0.1 per axis, no observer", false, disturbance(0.1)),
        "disturbance-1" => ("lissajous3d-10 with d = 1 per axis, no observer (informational)", false, disturbance(1.0)),
        "disturbance-3" => ("lissajous3d-10 with d = 3 per axis, no observer", true, disturbance(3.0)),
        other => {
            return Err(Error::config(format!(
                "unknown preset `{other}`; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(Preset { name: PRESET_NAMES.iter().find(|n| **n == name).copied().unwrap_or_default(), description, negative, config })
}

pub fn presets() -> Vec<Preset> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("bundled preset")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::CheckStatus;
    use crate::sim::validate_config;

    #[test]
    fn every_positive_preset_validates() {
        for p in presets() {
            let rep = validate_config(&p.config).unwrap();
            assert!(!rep.has_hard_failure(), "{}:\n{}", p.name, rep.render());
            if !p.negative {
                assert!(rep.checks.iter().all(|c| c.status == CheckStatus::Pass), "{}:\n{}", p.name, rep.render());
            }
        }
    }

    #[test]
    fn presets_survive_toml() {
        for p in presets() {
            let text = p.config.to_toml().unwrap();
            assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), p.config, "{}", p.name);
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(preset("nope").is_err());
        assert!(presets().len() >= 7);
    }
}
