//! Parametric desired paths in `R^n`, their lifted form and path-following errors.
//!
//! A path is `omega -> (f_1(omega), ..., f_n(omega))`. Every path carries
//! analytic first and second derivatives; nothing here differentiates
//! numerically.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quadrature::adaptive_simpson;
use crate::{Error, Result};

/// Absolute tolerance of the arc-length quadrature used by [`check_capacity`].
pub const ARC_LENGTH_TOL: f64 = 1e-8;

/// Builtin path families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Circle,
    Lissajous2d,
    Lissajous3d,
}

impl PathKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(PathKind::Circle),
            "lissajous2d" => Ok(PathKind::Lissajous2d),
            "lissajous3d" => Ok(PathKind::Lissajous3d),
            other => Err(Error::config(format!("unknown path kind `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PathKind::Circle => "circle",
            PathKind::Lissajous2d => "lissajous2d",
            PathKind::Lissajous3d => "lissajous3d",
        }
    }
}

/// Scalar evaluator used by user-defined path components.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One coordinate of a user-defined path: value and its first two derivatives.
#[derive(Clone)]
pub struct Component {
    pub value: ScalarFn,
    pub d1: ScalarFn,
    pub d2: ScalarFn,
}

impl Component {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }
}

#[derive(Clone)]
enum Shape {
    Circle { a: f64 },
    Lissajous2d { a: f64, b: f64 },
    Lissajous3d { scale: f64 },
    Custom(Vec<Component>),
}

/// An n-dimensional parametric curve with analytic derivatives.
#[derive(Clone)]
pub struct ParametricPath {
    name: String,
    dim: usize,
    period: Option<f64>,
    shape: Shape,
}

impl fmt::Debug for ParametricPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricPath")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("period", &self.period)
            .finish()
    }
}

/// Value, first and second derivative of a path at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct PathJet {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

/// Path-following error `phi_j = x_j - f_j(omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathError(pub Vec<f64>);

impl PathError {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Builds one of the builtin paths.
///
/// * circle: `(a cos w, a sin w)`, period `2 pi`.
/// * lissajous2d: `(a cos w, a sin w cos w) / (1 + b sin^2 w)`, period `2 pi`.
/// * lissajous3d: `scale * (16 cos(w/2), 6 cos(w + pi/2), 2 cos w)`, period `4 pi`.
///
/// `squash` is only read by lissajous2d.
pub fn builtin_path(kind: PathKind, scale: f64, squash: f64) -> Result<ParametricPath> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::config(format!("path scale must be positive, got {scale}")));
    }
    let (dim, period, shape) = match kind {
        PathKind::Circle => (2, 2.0 * PI, Shape::Circle { a: scale }),
        PathKind::Lissajous2d => {
            if !(squash > -1.0) || !squash.is_finite() {
                return Err(Error::config(format!(
                    "lissajous squash parameter must exceed -1, got {squash}"
                )));
            }
            (2, 2.0 * PI, Shape::Lissajous2d { a: scale, b: squash })
        }
        PathKind::Lissajous3d => (3, 4.0 * PI, Shape::Lissajous3d { scale }),
    };
    Ok(ParametricPath {
        name: kind.name().to_string(),
        dim,
        period: Some(period),
        shape,
    })
}

impl ParametricPath {
    /// User-defined path. `period` is `None` for open curves.
    pub fn custom(
        name: impl Into<String>,
        components: Vec<Component>,
        period: Option<f64>,
    ) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::config("a path needs at least two components"));
        }
        if let Some(p) = period {
            if !(p > 0.0) {
                return Err(Error::config("path period must be positive"));
            }
        }
        Ok(Self {
            name: name.into(),
            dim: components.len(),
            period,
            shape: Shape::Custom(components),
        })
    }

    pub fn unit_circle() -> Self {
        builtin_path(PathKind::Circle, 1.0, 0.0).expect("unit circle is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared period of a closed path.
    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn eval(&self, omega: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut d1 = vec![0.0; self.dim];
        let mut d2 = vec![0.0; self.dim];
        self.jet_into(omega, &mut v, &mut d1, &mut d2);
        v
    }

    pub fn jet(&self, omega: f64) -> PathJet {
        let mut value = vec![0.0; self.dim];
        let mut d1 = vec![0.0; self.dim];
        let mut d2 = vec![0.0; self.dim];
        self.jet_into(omega, &mut value, &mut d1, &mut d2);
        PathJet { value, d1, d2 }
    }

    /// Allocation-free variant of [`ParametricPath::jet`]; all slices must have length `dim`.
    pub fn jet_into(&self, w: f64, value: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        match &self.shape {
            Shape::Circle { a } => {
                let (s, c) = w.sin_cos();
                value[0] = a * c;
                value[1] = a * s;
                d1[0] = -a * s;
                d1[1] = a * c;
                d2[0] = -a * c;
                d2[1] = -a * s;
            }
            Shape::Lissajous2d { a, b } => {
                // f = h / g with g = 1 + b sin^2 w; f'' = (h'' - 2 f' g' - f g'') / g.
                let (s, c) = w.sin_cos();
                let (s2, c2) = (2.0 * w).sin_cos();
                let g = 1.0 + b * s * s;
                let g1 = b * s2;
                let g2 = 2.0 * b * c2;
                let h = [a * c, 0.5 * a * s2];
                let h1 = [-a * s, a * c2];
                let h2 = [-a * c, -2.0 * a * s2];
                for j in 0..2 {
                    let f = h[j] / g;
                    let fp = (h1[j] - f * g1) / g;
                    value[j] = f;
                    d1[j] = fp;
                    d2[j] = (h2[j] - 2.0 * fp * g1 - f * g2) / g;
                }
            }
            Shape::Lissajous3d { scale } => {
                let (sh, ch) = (0.5 * w).sin_cos();
                let (s, c) = w.sin_cos();
                // 6 cos(w + pi/2) written as -6 sin w so that it is exact at w = 0.
                value[0] = scale * 16.0 * ch;
                value[1] = scale * -6.0 * s;
                value[2] = scale * 2.0 * c;
                d1[0] = scale * -8.0 * sh;
                d1[1] = scale * -6.0 * c;
                d1[2] = scale * -2.0 * s;
                d2[0] = scale * -4.0 * ch;
                d2[1] = scale * 6.0 * s;
                d2[2] = scale * -2.0 * c;
            }
            Shape::Custom(components) => {
                for (j, comp) in components.iter().enumerate() {
                    value[j] = (comp.value)(w);
                    d1[j] = (comp.d1)(w);
                    d2[j] = (comp.d2)(w);
                }
            }
        }
    }

    /// Speed `|df/domega|` at `omega`.
    pub fn speed(&self, omega: f64) -> f64 {
        let jet = self.jet(omega);
        jet.d1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Arc length over `[from, to]`.
    pub fn arc_length(&self, from: f64, to: f64) -> f64 {
        adaptive_simpson(|s| self.speed(s), from, to, ARC_LENGTH_TOL)
    }
}

/// `phi_j = x_j - f_j(omega)`.
pub fn path_error(path: &ParametricPath, x: &[f64], omega: f64) -> Result<PathError> {
    if x.len() != path.dim() {
        return Err(Error::contract(format!(
            "position has {} components, path is {}-dimensional",
            x.len(),
            path.dim()
        )));
    }
    let f = path.eval(omega);
    Ok(PathError(x.iter().zip(&f).map(|(xi, fi)| xi - fi).collect()))
}

/// Gradients of the lifted error functions with respect to `(x, omega)`.
///
/// The j-th gradient is `e_j` in the first `n` slots and `-df_j/domega` in slot `n+1`.
pub fn error_gradient(path: &ParametricPath, omega: f64) -> Vec<Vec<f64>> {
    let n = path.dim();
    let jet = path.jet(omega);
    (0..n)
        .map(|j| {
            let mut g = vec![0.0; n + 1];
            g[j] = 1.0;
            g[n] = -jet.d1[j];
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

/// Outcome of the path-capacity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityCheck {
    pub status: CheckStatus,
    /// Arc length spanned by a platoon of `N` robots spaced `R` apart in parameter.
    pub platoon_length: f64,
    /// Length of one period of the path (`NaN` when unknown).
    pub path_length: f64,
    /// `path_length - platoon_length`.
    pub slack: f64,
    pub note: String,
}

impl CapacityCheck {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Checks that one period of a closed path is longer than a platoon of `n_robots`
/// whose parametric extent is `n_robots * sensing_radius`.
pub fn check_capacity(
    path: &ParametricPath,
    n_robots: usize,
    sensing_radius: f64,
) -> Result<CapacityCheck> {
    if !(sensing_radius > 0.0) {
        return Err(Error::contract("sensing radius must be positive"));
    }
    let Some(period) = path.period() else {
        return Ok(CapacityCheck {
            status: CheckStatus::Warn,
            platoon_length: f64::NAN,
            path_length: f64::NAN,
            slack: f64::NAN,
            note: format!("path `{}` declares no period; capacity not checked", path.name()),
        });
    };
    let path_length = path.arc_length(0.0, period);
    let platoon_length = path.arc_length(0.0, n_robots as f64 * sensing_radius);
    let slack = path_length - platoon_length;
    let status = if slack > 0.0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CapacityCheck {
        status,
        platoon_length,
        path_length,
        slack,
        note: format!(
            "path length {path_length:.6} vs platoon length {platoon_length:.6} (N = {n_robots}, R = {sensing_radius})"
        ),
    })
}
