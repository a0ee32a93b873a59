//! The higher-dimensional guiding vector field on the lifted path.
//!
//! [`chi`] is the closed form used by the controllers; [`chi_generic`]
//! builds the same field from the wedge product of the error gradients and
//! exists to cross-check it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{determinant, Matrix};
use crate::paths::{error_gradient, ParametricPath};
use crate::{Error, Result};

/// Largest dimension the wedge product accepts by default.
pub const DEFAULT_WEDGE_CAP: usize = 8;

/// Controller and estimator gains for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    /// Per-axis field gains (diagonal of `K`).
    pub k: Vec<f64>,
    /// Attraction towards the estimated target coordinate.
    pub c: f64,
    /// Sensing radius `R` in parameter space.
    pub sensing_radius: f64,
    /// Safe radius `r` in parameter space, `0 < r < R`.
    pub safe_radius: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GainSet {
    /// Checks positivity of every gain and `r < R`.
    ///
    /// `gamma2 < 1` is not enforced here: the estimator stability condition
    /// is reported by the configuration checks instead, so that scenarios
    /// with non-compliant estimator gains can still be run and studied.
    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return Err(Error::config("field gains k_j must all be positive"));
        }
        if !(self.c > 0.0) {
            return Err(Error::config("consensus gain c must be positive"));
        }
        if !(self.safe_radius > 0.0) || !(self.safe_radius < self.sensing_radius) {
            return Err(Error::config(format!(
                "radii must satisfy 0 < r < R (r = {}, R = {})",
                self.safe_radius, self.sensing_radius
            )));
        }
        if !(self.gamma1 > 0.0) || !(self.gamma2 > 0.0) {
            return Err(Error::config("estimator gains must be positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }
}

/// Generalized cross product of `n` vectors in `R^{n+1}`.
///
/// Component `m` (1-based) is `(-1)^(m+1)` times the determinant of the
/// `n x n` matrix left after deleting column `m` from the stacked inputs.
pub fn wedge(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    wedge_with_cap(vectors, DEFAULT_WEDGE_CAP)
}

pub fn wedge_with_cap(vectors: &[Vec<f64>], cap: usize) -> Result<Vec<f64>> {
    let n = vectors.len();
    if n == 0 || n > cap {
        return Err(Error::contract(format!(
            "wedge needs between 1 and {cap} vectors, got {n}"
        )));
    }
    if vectors.iter().any(|v| v.len() != n + 1) {
        return Err(Error::contract(format!(
            "wedge of {n} vectors needs length {}",
            n + 1
        )));
    }
    let mut out = vec![0.0; n + 1];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut minor = Matrix::zeros(n);
        for (row, v) in vectors.iter().enumerate() {
            let mut col = 0;
            for (j, &x) in v.iter().enumerate() {
                if j != m {
                    minor.set(row, col, x);
                    col += 1;
                }
            }
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign * determinant(minor);
    }
    Ok(out)
}

fn parity(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_dims(path: &ParametricPath, x: &[f64], gains: &GainSet) -> Result<()> {
    let n = path.dim();
    if x.len() != n || gains.k.len() != n {
        return Err(Error::contract(format!(
            "dimension mismatch: path {n}, position {}, gains {}",
            x.len(),
            gains.k.len()
        )));
    }
    Ok(())
}

/// Closed-form field: `((-1)^n f'_j - k_j phi_j, (-1)^n + sum_j k_j phi_j f'_j)`.
pub fn chi(path: &ParametricPath, x: &[f64], omega: f64, gains: &GainSet) -> Result<Vec<f64>> {
    check_dims(path, x, gains)?;
    let n = path.dim();
    let jet = path.jet(omega);
    let sign = parity(n);
    let mut out = vec![0.0; n + 1];
    let mut last = sign;
    for j in 0..n {
        let phi = x[j] - jet.value[j];
        out[j] = sign * jet.d1[j] - gains.k[j] * phi;
        last += gains.k[j] * phi * jet.d1[j];
    }
    out[n] = last;
    Ok(out)
}

/// Field built from its definition: wedge of the error gradients minus
/// `sum_j k_j phi_j grad phi_j`.
pub fn chi_generic(
    path: &ParametricPath,
    x: &[f64],
    omega: f64,
    gains: &GainSet,
) -> Result<Vec<f64>> {
    check_dims(path, x, gains)?;
    let grads = error_gradient(path, omega);
    let mut out = wedge(&grads)?;
    let f = path.eval(omega);
    for (j, grad) in grads.iter().enumerate() {
        let phi = x[j] - f[j];
        for (o, g) in out.iter_mut().zip(grad) {
            *o -= gains.k[j] * phi * g;
        }
    }
    Ok(out)
}

/// Axis-aligned sampling region over `(x, omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub omega_lo: f64,
    pub omega_hi: f64,
}

impl SampleBox {
    /// Bounding box of the path over `[omega_lo, omega_hi]`, padded by `margin`.
    pub fn around_path(path: &ParametricPath, omega_lo: f64, omega_hi: f64, margin: f64) -> Self {
        let n = path.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let steps = 2000;
        for i in 0..=steps {
            let w = omega_lo + (omega_hi - omega_lo) * i as f64 / steps as f64;
            for (j, v) in path.eval(w).into_iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Self {
            x_lo: lo.into_iter().map(|v| v - margin).collect(),
            x_hi: hi.into_iter().map(|v| v + margin).collect(),
            omega_lo,
            omega_hi,
        }
    }
}

/// Minimum `|chi|` over `samples` uniform draws in `region`.
pub fn singularity_margin(
    path: &ParametricPath,
    gains: &GainSet,
    region: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::contract("singularity margin needs at least one sample"));
    }
    let n = path.dim();
    if region.x_lo.len() != n || region.x_hi.len() != n {
        return Err(Error::contract("sample box dimension does not match path"));
    }
    let empty = region.omega_hi < region.omega_lo
        || region.x_lo.iter().zip(&region.x_hi).any(|(lo, hi)| hi < lo);
    if empty {
        return Err(Error::contract("sample box is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = region.x_lo[j] + (region.x_hi[j] - region.x_lo[j]) * rng.random::<f64>();
        }
        let w = region.omega_lo + (region.omega_hi - region.omega_lo) * rng.random::<f64>();
        let field = chi(path, &x, w, gains)?;
        best = best.min(field.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(best)
}
