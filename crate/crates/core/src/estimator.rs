//! Distributed estimation of the target virtual coordinate.
//!
//! Every robot keeps an estimate of the target coordinate and of its rate.
//! Robots with access to the target (the anchors) are pulled towards it,
//! and every robot is pulled towards its communication neighbours.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::{Error, Result};

/// Off-diagonal tolerance of the Jacobi eigensolver.
pub const EIGEN_TOL: f64 = 1e-12;

/// Undirected communication graph with target-access flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyGraph {
    adjacency: Vec<Vec<usize>>,
    anchors: Vec<bool>,
}

impl TopologyGraph {
    /// Graph from an undirected edge list; duplicate edges are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], anchors: &[usize]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Topology(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if i == j {
                return Err(Error::Topology(format!("self loop at node {i}")));
            }
            if !adjacency[i].contains(&j) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let mut flags = vec![false; n];
        for &a in anchors {
            if a >= n {
                return Err(Error::Topology(format!("anchor {a} outside 0..{n}")));
            }
            flags[a] = true;
        }
        Ok(Self { adjacency, anchors: flags })
    }

    /// Cycle `0 - 1 - ... - n-1 - 0`.
    pub fn ring(n: usize, anchors: &[usize]) -> Result<Self> {
        let edges: Vec<(usize, usize)> = match n {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        Self::from_edges(n, &edges, anchors)
    }

    /// Chain `0 - 1 - ... - n-1`.
    pub fn path(n: usize, anchors: &[usize]) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges, anchors)
    }

    pub fn complete(n: usize, anchors: &[usize]) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Self::from_edges(n, &edges, anchors)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        self.anchors[i]
    }

    pub fn has_anchor(&self) -> bool {
        self.anchors.iter().any(|&b| b)
    }

    /// Sorted undirected edge list with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// Same node set with every edge and anchor flag of a dead node removed.
    pub fn without(&self, alive: &[bool]) -> Self {
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .map(|(i, list)| {
                if alive[i] {
                    list.iter().copied().filter(|&j| alive[j]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let anchors = self.anchors.iter().zip(alive).map(|(&b, &a)| b && a).collect();
        Self { adjacency, anchors }
    }

    /// Graph induced on the alive nodes, renumbered in index order.
    pub fn induced(&self, alive: &[bool]) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| alive[i]).collect();
        let mut index = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let adjacency = keep
            .iter()
            .map(|&i| {
                self.adjacency[i]
                    .iter()
                    .filter(|&&j| alive[j])
                    .map(|&j| index[j])
                    .collect()
            })
            .collect();
        let anchors = keep.iter().map(|&i| self.anchors[i]).collect();
        Self { adjacency, anchors }
    }

    /// Whether the graph is connected (vacuously true when empty).
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// `L + B` with `L` the graph Laplacian and `B = diag(b)`.
    pub fn laplacian_plus_anchors(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n);
        for (i, list) in self.adjacency.iter().enumerate() {
            m.set(i, i, list.len() as f64 + if self.anchors[i] { 1.0 } else { 0.0 });
            for &j in list {
                m.set(i, j, -1.0);
            }
        }
        m
    }
}

/// Per-robot estimates of the target coordinate and its rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub omega_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
}

impl EstimatorState {
    pub fn zeros(n: usize) -> Self {
        Self { omega_hat: vec![0.0; n], sigma_hat: vec![0.0; n] }
    }

    /// Every robot starts on the consensus manifold.
    pub fn exact(n: usize, omega_star: f64, rate: f64) -> Self {
        Self { omega_hat: vec![omega_star; n], sigma_hat: vec![rate; n] }
    }

    pub fn is_finite(&self) -> bool {
        self.omega_hat.iter().chain(&self.sigma_hat).all(|v| v.is_finite())
    }
}

/// Time derivatives of an [`EstimatorState`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorDerivatives {
    pub d_omega_hat: Vec<f64>,
    pub d_sigma_hat: Vec<f64>,
}

/// Innovation `sum_j (w_j - w_i) + b_i (w* - w_i)` for robot `i`.
#[inline]
pub fn innovation(omega_hat: &[f64], omega_star: f64, topo: &TopologyGraph, i: usize) -> f64 {
    let wi = omega_hat[i];
    let mut s: f64 = topo.adjacency[i].iter().map(|&j| omega_hat[j] - wi).sum();
    if topo.anchors[i] {
        s += omega_star - wi;
    }
    s
}

/// `d w_hat = g1 * innovation + s_hat`, `d s_hat = g1 * g2 * innovation`.
pub fn estimator_derivatives(
    state: &EstimatorState,
    omega_star: f64,
    topo: &TopologyGraph,
    gamma1: f64,
    gamma2: f64,
) -> Result<EstimatorDerivatives> {
    let n = topo.len();
    if state.omega_hat.len() != n || state.sigma_hat.len() != n {
        return Err(Error::contract("estimator state does not match topology size"));
    }
    let mut d_omega_hat = vec![0.0; n];
    let mut d_sigma_hat = vec![0.0; n];
    for i in 0..n {
        let inn = innovation(&state.omega_hat, omega_star, topo, i);
        d_omega_hat[i] = gamma1 * inn + state.sigma_hat[i];
        d_sigma_hat[i] = gamma1 * gamma2 * inn;
    }
    Ok(EstimatorDerivatives { d_omega_hat, d_sigma_hat })
}

/// Smallest eigenvalue of `L + B`.
pub fn min_eigenvalue(topo: &TopologyGraph) -> Result<f64> {
    if topo.is_empty() {
        return Err(Error::Topology("empty topology has no eigenvalues".into()));
    }
    let m = topo.laplacian_plus_anchors();
    let eig = symmetric_eigenvalues(&m, EIGEN_TOL)?;
    Ok(eig[0])
}

/// Lower bound on `gamma1` for given `gamma2` and smallest eigenvalue.
pub fn gain_threshold(gamma2: f64, lambda_min: f64) -> f64 {
    1.0 / (4.0 * gamma2 * (1.0 - gamma2 * gamma2) * lambda_min)
}

/// Whether `0 < gamma2 < 1` and `gamma1` exceeds [`gain_threshold`].
pub fn validate_gains(gamma1: f64, gamma2: f64, lambda_min: f64) -> Result<bool> {
    if !(lambda_min > 0.0) {
        return Err(Error::Topology(format!(
            "smallest eigenvalue {lambda_min} is not positive: the graph is disconnected or has no anchor"
        )));
    }
    if !(gamma2 > 0.0 && gamma2 < 1.0) {
        return Ok(false);
    }
    Ok(gamma1 > gain_threshold(gamma2, lambda_min))
}

/// Sampled error history of a stand-alone estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTrace {
    pub t: Vec<f64>,
    /// `max_i |w_hat_i - w*|` at each sample.
    pub max_error: Vec<f64>,
}

impl EstimatorTrace {
    /// Least-squares slope of `ln(max_error)` over samples with `t` in `[from, to]`.
    pub fn log_slope(&self, from: f64, to: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.max_error)
            .filter(|(t, e)| **t >= from && **t <= to && **e > 0.0)
            .map(|(t, e)| (*t, e.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        Some(cov / var)
    }

    /// Error at the sample nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let i = self
            .t
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.max_error[i]
    }
}

/// Integrates the estimator alone with RK4 against a target moving at
/// constant `rate`, sampling the error every `dt`.
pub fn simulate_estimator(
    topo: &TopologyGraph,
    gamma1: f64,
    gamma2: f64,
    initial: EstimatorState,
    omega_star0: f64,
    rate: f64,
    dt: f64,
    duration: f64,
) -> Result<EstimatorTrace> {
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(Error::contract("estimator run needs positive dt and duration"));
    }
    let n = topo.len();
    if initial.omega_hat.len() != n || initial.sigma_hat.len() != n {
        return Err(Error::contract("estimator state does not match topology size"));
    }
    let steps = (duration / dt).round() as usize;
    let mut state = initial;
    let err = |s: &EstimatorState, ws: f64| {
        s.omega_hat.iter().fold(0.0f64, |m, w| m.max((w - ws).abs()))
    };
    let mut trace = EstimatorTrace { t: vec![0.0], max_error: vec![err(&state, omega_star0)] };
    let shifted = |s: &EstimatorState, d: &EstimatorDerivatives, h: f64| EstimatorState {
        omega_hat: s.omega_hat.iter().zip(&d.d_omega_hat).map(|(a, b)| a + h * b).collect(),
        sigma_hat: s.sigma_hat.iter().zip(&d.d_sigma_hat).map(|(a, b)| a + h * b).collect(),
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        let ws = omega_star0 + rate * t;
        let k1 = estimator_derivatives(&state, ws, topo, gamma1, gamma2)?;
        let s2 = shifted(&state, &k1, dt / 2.0);
        let k2 = estimator_derivatives(&s2, ws + rate * dt / 2.0, topo, gamma1, gamma2)?;
        let s3 = shifted(&state, &k2, dt / 2.0);
        let k3 = estimator_derivatives(&s3, ws + rate * dt / 2.0, topo, gamma1, gamma2)?;
        let s4 = shifted(&state, &k3, dt);
        let k4 = estimator_derivatives(&s4, ws + rate * dt, topo, gamma1, gamma2)?;
        for i in 0..n {
            state.omega_hat[i] += dt / 6.0
                * (k1.d_omega_hat[i] + 2.0 * k2.d_omega_hat[i] + 2.0 * k3.d_omega_hat[i] + k4.d_omega_hat[i]);
            state.sigma_hat[i] += dt / 6.0
                * (k1.d_sigma_hat[i] + 2.0 * k2.d_sigma_hat[i] + 2.0 * k3.d_sigma_hat[i] + k4.d_sigma_hat[i]);
        }
        if let Some(bad) = (0..n).find(|&i| !(state.omega_hat[i].is_finite() && state.sigma_hat[i].is_finite())) {
            return Err(Error::Numeric {
                tick: step + 1,
                time: t + dt,
                robot: bad,
                what: "estimator state".into(),
            });
        }
        let tn = (step + 1) as f64 * dt;
        trace.t.push(tn);
        trace.max_error.push(err(&state, omega_star0 + rate * tn));
    }
    Ok(trace)
}
