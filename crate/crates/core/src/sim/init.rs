//! Seeded initial conditions.
//!
//! Every robot draws from its own ChaCha stream of the scenario seed, so a
//! robot's initial state does not depend on how many draws other robots made.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::paths::ParametricPath;
use crate::{Error, Result};

use super::config::{OmegaInit, PositionInit, RobotModel, ScenarioConfig};

/// Stream reserved for draws that concern the whole team (slot shuffles).
const TEAM_STREAM: u64 = 0;

/// Grid resolution of the `projected` coordinate assignment.
const PROJECTION_GRID: usize = 4096;

/// Random generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator of robot `i` (0-based).
pub fn robot_rng(seed: u64, i: usize) -> ChaCha8Rng {
    stream_rng(seed, i as u64 + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub x: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    /// Vessel headings; empty for integrators.
    pub psi: Vec<f64>,
}

pub fn initial_conditions(cfg: &ScenarioConfig) -> Result<InitialConditions> {
    let path = cfg.build_path()?;
    let n = path.dim();
    let count = cfg.robots.count;
    let rb = &cfg.robots;
    let seed = rb.seed;
    let (r, big_r) = (cfg.gains.safe_radius, cfg.gains.sensing_radius);

    // Robot-specific generators, consumed in a fixed order: offsets, heading.
    let mut rngs: Vec<ChaCha8Rng> = (0..count).map(|i| robot_rng(seed, i)).collect();

    let explicit_x = || -> Result<Vec<Vec<f64>>> {
        let xs = rb
            .explicit_positions
            .clone()
            .ok_or_else(|| Error::config("positions = \"explicit\" needs explicit_positions"))?;
        if xs.len() != count || xs.iter().any(|x| x.len() != n) {
            return Err(Error::config(format!("explicit_positions must be {count} vectors of length {n}")));
        }
        Ok(xs)
    };

    let (x, omega) = match rb.omega_init {
        OmegaInit::Projected => {
            let x = match rb.positions {
                PositionInit::Explicit => explicit_x()?,
                PositionInit::Box => box_positions(cfg, n, &mut rngs)?,
                PositionInit::AroundPath => {
                    return Err(Error::config(
                        "omega_init = \"projected\" needs explicit or box positions",
                    ))
                }
            };
            let omega = projected_omega(&path, &x, r, big_r);
            (x, omega)
        }
        mode => {
            let omega = match mode {
                OmegaInit::Explicit => {
                    let w = rb
                        .explicit_omega
                        .clone()
                        .ok_or_else(|| Error::config("omega_init = \"explicit\" needs explicit_omega"))?;
                    if w.len() != count {
                        return Err(Error::config(format!("explicit_omega needs {count} entries")));
                    }
                    w
                }
                _ => spaced_omega(cfg, r, big_r)?,
            };
            let x = match rb.positions {
                PositionInit::Explicit => explicit_x()?,
                PositionInit::Box => box_positions(cfg, n, &mut rngs)?,
                PositionInit::AroundPath => {
                    if !(rb.spread >= 0.0) {
                        return Err(Error::config("robots.spread must be >= 0"));
                    }
                    omega
                        .iter()
                        .zip(rngs.iter_mut())
                        .map(|(&w, rng)| {
                            path.eval(w)
                                .into_iter()
                                .map(|f| f + rb.spread * (2.0 * rng.random::<f64>() - 1.0))
                                .collect()
                        })
                        .collect()
                }
            };
            (x, omega)
        }
    };

    let psi = if rb.model == RobotModel::Usv {
        match &rb.headings {
            Some(h) if h.len() != count => {
                return Err(Error::config(format!("headings needs {count} entries")));
            }
            Some(h) => h.clone(),
            None => rngs.iter_mut().map(|rng| PI * (2.0 * rng.random::<f64>() - 1.0)).collect(),
        }
    } else {
        Vec::new()
    };
    Ok(InitialConditions { x, omega, psi })
}

fn box_positions(cfg: &ScenarioConfig, n: usize, rngs: &mut [ChaCha8Rng]) -> Result<Vec<Vec<f64>>> {
    let lo = cfg.robots.box_lo.clone().ok_or_else(|| Error::config("positions = \"box\" needs box_lo"))?;
    let hi = cfg.robots.box_hi.clone().ok_or_else(|| Error::config("positions = \"box\" needs box_hi"))?;
    if lo.len() != n || hi.len() != n || lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::config(format!("box_lo/box_hi must be ordered vectors of length {n}")));
    }
    Ok(rngs
        .iter_mut()
        .map(|rng| (0..n).map(|j| lo[j] + (hi[j] - lo[j]) * rng.random::<f64>()).collect())
        .collect())
}

/// `omega_center + (slot_i - (N-1)/2) * gap`, with slots optionally shuffled.
fn spaced_omega(cfg: &ScenarioConfig, r: f64, big_r: f64) -> Result<Vec<f64>> {
    let rb = &cfg.robots;
    let count = rb.count;
    let gap = rb.omega_gap.unwrap_or(0.5 * (r + big_r));
    if !(gap > 0.0) {
        return Err(Error::config("robots.omega_gap must be positive"));
    }
    let mut slots: Vec<usize> = (0..count).collect();
    if rb.shuffle {
        slots.shuffle(&mut stream_rng(rb.seed, TEAM_STREAM));
    }
    let mid = (count as f64 - 1.0) / 2.0;
    Ok(slots.iter().map(|&s| rb.omega_center + (s as f64 - mid) * gap).collect())
}

/// Nearest grid parameter to each position (ties to the smaller parameter),
/// then pushed apart so consecutive coordinates differ by more than `r`.
fn projected_omega(path: &ParametricPath, x: &[Vec<f64>], r: f64, big_r: f64) -> Vec<f64> {
    let span = path.period().unwrap_or(20.0);
    let start = if path.period().is_some() { 0.0 } else { -10.0 };
    let grid: Vec<(f64, Vec<f64>)> = (0..PROJECTION_GRID)
        .map(|i| {
            let w = start + span * i as f64 / PROJECTION_GRID as f64;
            (w, path.eval(w))
        })
        .collect();
    let mut omega: Vec<f64> = x
        .iter()
        .map(|xi| {
            let mut best = (f64::INFINITY, 0.0);
            for (w, f) in &grid {
                let d: f64 = xi.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.0 {
                    best = (d, *w);
                }
            }
            best.1
        })
        .collect();
    let min_gap = r + 0.05 * (big_r - r);
    let mut order: Vec<usize> = (0..omega.len()).collect();
    order.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]).then(a.cmp(&b)));
    for k in 1..order.len() {
        let (prev, cur) = (order[k - 1], order[k]);
        if omega[cur] - omega[prev] < min_gap {
            omega[cur] = omega[prev] + min_gap;
        }
    }
    omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn spaced_slots_are_a_permutation() {
        let cfg = preset("lissajous3d-10").unwrap().config;
        let init = initial_conditions(&cfg).unwrap();
        let mut w = init.omega.clone();
        w.sort_by(f64::total_cmp);
        for k in 1..w.len() {
            assert!((w[k] - w[k - 1] - 0.5).abs() < 1e-12);
        }
        assert!((w.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn robot_streams_are_independent_of_team_size() {
        let mut cfg = preset("lissajous3d-10").unwrap().config;
        cfg.robots.shuffle = false;
        cfg.robots.omega_init = OmegaInit::Explicit;
        cfg.robots.explicit_omega = Some((0..10).map(|i| i as f64).collect());
        let a = initial_conditions(&cfg).unwrap();
        cfg.robots.count = 4;
        cfg.robots.explicit_omega = Some((0..4).map(|i| i as f64).collect());
        let b = initial_conditions(&cfg).unwrap();
        assert_eq!(a.x[..4], b.x[..]);
    }

    #[test]
    fn projected_restores_separation() {
        let path = ParametricPath::unit_circle();
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.01], vec![0.0, 1.0]];
        let w = projected_omega(&path, &x, 0.4, 0.6);
        let mut s = w.clone();
        s.sort_by(f64::total_cmp);
        assert!(s.windows(2).all(|p| p[1] - p[0] > 0.4));
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn same_seed_same_state() {
        let cfg = preset("lissajous3d-10").unwrap().config;
        assert_eq!(initial_conditions(&cfg).unwrap(), initial_conditions(&cfg).unwrap());
        let mut other = cfg.clone();
        other.robots.seed += 1;
        assert_ne!(initial_conditions(&cfg).unwrap(), initial_conditions(&other).unwrap());
    }
}
