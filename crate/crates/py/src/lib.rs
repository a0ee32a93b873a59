//! Python bindings: scenario presets, validation, simulation and the field.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dgvf_core::analysis::{verify_platoon, Tolerances};
use dgvf_core::gvf::{chi as core_chi, GainSet};
use dgvf_core::paths::{builtin_path, PathKind};
use dgvf_core::presets::{preset, PRESET_NAMES};
use dgvf_core::sim::{run, validate_config, ScenarioConfig};
use dgvf_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::Domain(_) | Error::TomlDe(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Names of the bundled scenarios.
#[pyfunction]
fn preset_names() -> Vec<String> {
    PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// TOML text of a bundled scenario.
#[pyfunction]
fn preset_toml(name: &str) -> PyResult<String> {
    preset(name).and_then(|p| p.config.to_toml()).map_err(to_py)
}

/// Hypothesis checks of a scenario as `(id, status, message)` triples.
#[pyfunction]
fn validate(config_toml: &str) -> PyResult<Vec<(String, String, String)>> {
    let cfg = ScenarioConfig::from_toml(config_toml).map_err(to_py)?;
    let rep = validate_config(&cfg).map_err(to_py)?;
    Ok(rep
        .checks
        .into_iter()
        .map(|c| (c.id, format!("{:?}", c.status).to_lowercase(), c.message))
        .collect())
}

/// Runs a scenario. Returns the platoon report as JSON, the logged times
/// and the coordinate series of every robot.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn simulate(py: Python<'_>, config_toml: &str) -> PyResult<(String, Vec<f64>, Vec<Vec<f64>>)> {
    let cfg = ScenarioConfig::from_toml(config_toml).map_err(to_py)?;
    let (log, report) = py
        .detach(|| {
            let log = run(&cfg)?;
            let report = verify_platoon(&log, &Tolerances::from_config(&cfg))?;
            Ok::<_, Error>((log, report))
        })
        .map_err(to_py)?;
    let json = serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let omegas = (0..log.n_robots).map(|i| log.omega_series(i)).collect();
    Ok((json, log.times(), omegas))
}

/// Guiding vector field of a builtin path at `(x, omega)`.
#[pyfunction]
#[pyo3(signature = (kind, x, omega, k, scale = 1.0, squash = 0.0))]
fn chi(kind: &str, x: Vec<f64>, omega: f64, k: Vec<f64>, scale: f64, squash: f64) -> PyResult<Vec<f64>> {
    let path = PathKind::parse(kind).and_then(|kd| builtin_path(kd, scale, squash)).map_err(to_py)?;
    let gains = GainSet { k, c: 1.0, sensing_radius: 1.0, safe_radius: 0.5, gamma1: 1.0, gamma2: 0.5 };
    core_chi(&path, &x, omega, &gains).map_err(to_py)
}

#[pymodule]
fn dgvf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_toml, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(chi, m)?)?;
    Ok(())
}
