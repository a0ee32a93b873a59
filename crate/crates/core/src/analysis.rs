//! Post-hoc checks of a finished run: the four platoon claims, ordering,
//! convergence time and the Lyapunov diagnostics.

use serde::{Deserialize, Serialize};

use crate::coordination::{alpha, target_rate};
use crate::gvf::GainSet;
use crate::paths::ParametricPath;
use crate::sim::{ScenarioConfig, TrajectoryLog};
use crate::{Error, Result};

/// Survivors sorted by coordinate, ties broken by robot index. Indices are 0-based.
pub fn ordering(omega: &[f64], alive: &[bool]) -> Vec<usize> {
    let mut s: Vec<usize> = (0..omega.len()).filter(|&i| alive.get(i).copied().unwrap_or(true)).collect();
    s.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]).then(a.cmp(&b)));
    s
}

/// Thresholds used by [`verify_platoon`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eps_phi: f64,
    pub eps_omega: f64,
    /// Trailing fraction of the run treated as steady state.
    pub steady_fraction: f64,
    pub safe_radius: f64,
    pub sensing_radius: f64,
    pub convergence_band: f64,
}

impl Tolerances {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            eps_phi: cfg.output.eps_phi,
            eps_omega: cfg.output.eps_omega,
            steady_fraction: cfg.output.steady_fraction,
            safe_radius: cfg.gains.safe_radius,
            sensing_radius: cfg.gains.sensing_radius,
            convergence_band: cfg.output.convergence_band,
        }
    }
}

/// Claim 1: every survivor stays on the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathClaim {
    /// Max `|phi_j|` over the steady window, per survivor.
    pub max_abs_phi: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Claim 2: coordinate rates agree on the target rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateClaim {
    /// Largest spread of the finite-difference rates at one tick.
    pub spread: f64,
    /// Mean rate over the window and the survivors.
    pub consensus: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Claim 3: neighbours in the ordering keep a gap inside `(r, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapClaim {
    /// Adjacent gaps at the last tick, in ordering order.
    pub gaps: Vec<f64>,
    /// Smallest and largest adjacent gap seen over the steady window.
    pub window_min: Option<f64>,
    pub window_max: Option<f64>,
    pub passed: bool,
}

/// Claim 4: no alive pair ever comes within `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyClaim {
    pub min_gap: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonReport {
    /// Robots alive at the end of the run (1-based).
    pub survivors: Vec<usize>,
    pub window_start: f64,
    pub claim1: PathClaim,
    pub claim2: RateClaim,
    pub claim3: GapClaim,
    pub claim4: SafetyClaim,
    /// Final ordering of the survivors (1-based).
    pub ordering: Vec<usize>,
    /// Whether the ordering stayed constant over the steady window.
    pub ordering_stable: bool,
    pub convergence_time: Option<f64>,
    /// Smallest physical distance between alive robots over the run.
    pub min_distance: Option<f64>,
}

impl PlatoonReport {
    pub fn passed(&self) -> [bool; 4] {
        [self.claim1.passed, self.claim2.passed, self.claim3.passed, self.claim4.passed]
    }

    pub fn all_passed(&self) -> bool {
        self.passed().iter().all(|&p| p)
    }

    pub fn render(&self) -> String {
        let flag = |p: bool| if p { "pass" } else { "FAIL" };
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
        let max_phi = self.claim1.max_abs_phi.iter().cloned().fold(0.0, f64::max);
        let mut s = String::new();
        s.push_str(&format!("survivors        {:?}\n", self.survivors));
        s.push_str(&format!("steady window    t >= {:.3}\n", self.window_start));
        s.push_str(&format!(
            "claim 1  {}  max |phi| = {max_phi:.3e} (tol {})\n",
            flag(self.claim1.passed),
            self.claim1.tolerance
        ));
        s.push_str(&format!(
            "claim 2  {}  rate spread = {:.3e}, consensus = {:.6} (target {}, tol {})\n",
            flag(self.claim2.passed),
            self.claim2.spread,
            self.claim2.consensus,
            self.claim2.target,
            self.claim2.tolerance
        ));
        s.push_str(&format!(
            "claim 3  {}  adjacent gaps in window [{}, {}]\n",
            flag(self.claim3.passed),
            opt(self.claim3.window_min),
            opt(self.claim3.window_max)
        ));
        s.push_str(&format!("claim 4  {}  min pairwise gap = {}\n", flag(self.claim4.passed), opt(self.claim4.min_gap)));
        s.push_str(&format!("ordering         {:?} (stable: {})\n", self.ordering, self.ordering_stable));
        s.push_str(&format!("convergence time {}\n", opt(self.convergence_time)));
        s.push_str(&format!("min distance     {}\n", opt(self.min_distance)));
        s
    }
}

/// Earliest time after which every alive `|phi_ij|` stays within `band`.
pub fn convergence_time(log: &TrajectoryLog, band: f64) -> Option<f64> {
    let inside = |k: usize| {
        log.ticks[k]
            .robots
            .iter()
            .filter(|r| r.alive)
            .all(|r| r.phi.iter().all(|p| p.abs() <= band))
    };
    let mut first = None;
    for k in (0..log.ticks.len()).rev() {
        if !inside(k) {
            break;
        }
        first = Some(log.ticks[k].t);
    }
    first
}

/// Checks the four platoon claims on a finished log.
pub fn verify_platoon(log: &TrajectoryLog, tol: &Tolerances) -> Result<PlatoonReport> {
    let ticks = &log.ticks;
    let (t0, t_end) = match (ticks.first(), ticks.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::Analysis("log has no ticks".into())),
    };
    let (r, big_r) = (tol.safe_radius, tol.sensing_radius);
    let window_start = t_end - tol.steady_fraction * (t_end - t0);
    let w0 = ticks.iter().position(|tk| tk.t >= window_start).unwrap_or(ticks.len());
    if ticks.len() - w0 < 3 {
        return Err(Error::Analysis(format!(
            "steady window from t = {window_start} holds {} ticks; at least 3 are needed",
            ticks.len() - w0
        )));
    }
    let alive = log.final_alive();
    let survivors: Vec<usize> = (0..alive.len()).filter(|&i| alive[i]).collect();

    let max_abs_phi: Vec<f64> = survivors
        .iter()
        .map(|&i| {
            ticks[w0..]
                .iter()
                .flat_map(|tk| tk.robots[i].phi.iter().map(|p| p.abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    let claim1 = PathClaim {
        passed: max_abs_phi.iter().all(|&m| m <= tol.eps_phi),
        max_abs_phi,
        tolerance: tol.eps_phi,
    };

    // Central differences, so the rate check does not reuse the control law.
    let target = target_rate(log.dim);
    let mut spread: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    let lo = w0.max(1);
    for k in lo..ticks.len() - 1 {
        let h = ticks[k + 1].t - ticks[k - 1].t;
        let rates: Vec<f64> = survivors
            .iter()
            .map(|&i| (ticks[k + 1].robots[i].omega - ticks[k - 1].robots[i].omega) / h)
            .collect();
        if let (Some(mx), Some(mn)) = (
            rates.iter().cloned().reduce(f64::max),
            rates.iter().cloned().reduce(f64::min),
        ) {
            spread = spread.max(mx - mn);
        }
        sum += rates.iter().sum::<f64>();
        count += rates.len();
    }
    let consensus = if count > 0 { sum / count as f64 } else { f64::NAN };
    let claim2 = RateClaim {
        passed: spread <= tol.eps_omega && (consensus - target).abs() <= tol.eps_omega,
        spread,
        consensus,
        target,
        tolerance: tol.eps_omega,
    };

    let adjacent = |k: usize| -> (Vec<usize>, Vec<f64>) {
        let w: Vec<f64> = ticks[k].robots.iter().map(|r| r.omega).collect();
        let s = ordering(&w, &alive);
        let gaps = s.windows(2).map(|p| (w[p[1]] - w[p[0]]).abs()).collect();
        (s, gaps)
    };
    let mut window_min: Option<f64> = None;
    let mut window_max: Option<f64> = None;
    let mut ordering_stable = true;
    let (final_order, final_gaps) = adjacent(ticks.len() - 1);
    for k in w0..ticks.len() {
        let (s, gaps) = adjacent(k);
        ordering_stable &= s == final_order;
        for g in gaps {
            window_min = Some(window_min.map_or(g, |v| v.min(g)));
            window_max = Some(window_max.map_or(g, |v| v.max(g)));
        }
    }
    let claim3 = GapClaim {
        gaps: final_gaps,
        passed: window_min.is_none_or(|m| m > r) && window_max.is_none_or(|m| m < big_r),
        window_min,
        window_max,
    };

    let mut min_gap: Option<f64> = None;
    let mut min_distance: Option<f64> = None;
    for tk in ticks {
        let rs = &tk.robots;
        for i in 0..rs.len() {
            for k in i + 1..rs.len() {
                if rs[i].alive && rs[k].alive {
                    let g = (rs[i].omega - rs[k].omega).abs();
                    min_gap = Some(min_gap.map_or(g, |v| v.min(g)));
                    let d = rs[i].x.iter().zip(&rs[k].x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    min_distance = Some(min_distance.map_or(d, |v| v.min(d)));
                }
            }
        }
    }
    let claim4 = SafetyClaim { passed: min_gap.is_none_or(|g| g > r), min_gap };

    Ok(PlatoonReport {
        survivors: survivors.iter().map(|i| i + 1).collect(),
        window_start,
        claim1,
        claim2,
        claim3,
        claim4,
        ordering: final_order.iter().map(|i| i + 1).collect(),
        ordering_stable,
        convergence_time: convergence_time(log, tol.convergence_band),
        min_distance,
    })
}

/// `int_s^R alpha`, in closed form; zero beyond `R`.
pub fn barrier_integral(s: f64, r: f64, big_r: f64) -> Result<f64> {
    if !(s > r) {
        return Err(Error::Domain(format!("barrier integral needs s > r (s = {s}, r = {r})")));
    }
    if s >= big_r {
        return Ok(0.0);
    }
    Ok(((big_r - r) / (s - r)).ln() - (big_r - s) / (big_r - r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTerms {
    pub v: f64,
    /// `Omega`, which is never positive.
    pub dissipation: f64,
    /// `a_i` per robot; zero for dead robots.
    pub a: Vec<f64>,
}

/// Lyapunov function and dissipation bound of a team snapshot.
///
/// The barrier sums each unordered pair once. Fails with a domain error when
/// an alive pair is within `r`, since the barrier is then unbounded.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_diagnostics(
    path: &ParametricPath,
    x: &[Vec<f64>],
    omega: &[f64],
    omega_hat: &[f64],
    alive: &[bool],
    omega_star: f64,
    gains: &[GainSet],
    r: f64,
    big_r: f64,
) -> Result<LyapunovTerms> {
    let n = omega.len();
    let mut eta = vec![0.0; n];
    let mut v = 0.0;
    for i in 0..n {
        for k in i + 1..n {
            if !(alive[i] && alive[k]) {
                continue;
            }
            let diff = omega[i] - omega[k];
            let s = diff.abs();
            v += barrier_integral(s, r, big_r)?;
            if s < big_r {
                let a = alpha(s, r, big_r)? * diff.signum();
                eta[i] += a;
                eta[k] -= a;
            }
        }
    }
    let mut dissipation = 0.0;
    let mut a = vec![0.0; n];
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        let g = &gains[i];
        let jet = path.jet(omega[i]);
        let mut phi_k_phi = 0.0;
        let mut phi_kk_phi = 0.0;
        let mut phi_k_f = 0.0;
        for j in 0..jet.value.len() {
            let phi = x[i][j] - jet.value[j];
            phi_k_phi += g.k[j] * phi * phi;
            phi_kk_phi += g.k[j] * g.k[j] * phi * phi;
            phi_k_f += phi * g.k[j] * jet.d1[j];
        }
        let w_tilde = omega[i] - omega_star;
        let e = g.c * (omega_hat[i] - omega_star);
        v += 0.5 * (phi_k_phi + g.c * w_tilde * w_tilde);
        a[i] = phi_k_f - g.c * w_tilde + eta[i] + 0.5 * e;
        dissipation -= 0.5 * phi_kk_phi + a[i] * a[i];
    }
    Ok(LyapunovTerms { v, dissipation, a })
}
