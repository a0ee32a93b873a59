//! Per-robot control laws over the virtual coordinates.
//!
//! The distributed law combines the guiding vector field with a consensus
//! pull towards the estimated target coordinate and a repulsion between
//! robots whose coordinates fall inside the sensing radius.

use serde::{Deserialize, Serialize};

use crate::paths::ParametricPath;
use crate::gvf::GainSet;
use crate::{Error, Result};

/// Fraction of `R - r` kept between a gap and the safe radius before the
/// repulsion is clamped.
pub const CLAMP_FRACTION: f64 = 1e-4;

/// Repulsion strength for a gap `s`.
///
/// Errors when `s <= r`, where the law is undefined.
pub fn alpha(s: f64, r: f64, big_r: f64) -> Result<f64> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::Domain(format!("alpha needs 0 < r < R (r = {r}, R = {big_r})")));
    }
    if !(s > r) {
        return Err(Error::Domain(format!("alpha undefined at gap {s} <= r = {r}")));
    }
    Ok(alpha_unchecked(s, r, big_r))
}

#[inline]
fn alpha_unchecked(s: f64, r: f64, big_r: f64) -> f64 {
    if s > big_r {
        0.0
    } else {
        // The two terms cancel exactly at s == R.
        1.0 / (s - r) - 1.0 / (big_r - r)
    }
}

/// Repulsion strength with the discrete-time safety cap.
///
/// Gaps at or below `r + CLAMP_FRACTION * (R - r)` are evaluated at that
/// floor instead; the returned flag records that the cap was hit.
#[inline]
pub fn alpha_clamped(s: f64, r: f64, big_r: f64) -> (f64, bool) {
    let floor = r + CLAMP_FRACTION * (big_r - r);
    if s <= floor {
        (alpha_unchecked(floor, r, big_r), true)
    } else {
        (alpha_unchecked(s, r, big_r), false)
    }
}

/// Target coordinate rate `(-1)^n`.
pub fn target_rate(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A robot's sensing neighbourhood in coordinate space.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborView {
    pub robot: usize,
    pub omega: f64,
    /// `(neighbour index, neighbour coordinate)` pairs.
    pub neighbors: Vec<(usize, f64)>,
}

/// Builds every robot's neighbourhood: `k` is a neighbour of `i` when both
/// are alive, `k != i` and `|omega_i - omega_k| < R`.
pub fn sensing_neighbors(omega: &[f64], alive: &[bool], big_r: f64) -> Result<Vec<NeighborView>> {
    if omega.len() != alive.len() {
        return Err(Error::contract(format!(
            "coordinate and alive vectors differ in length ({} vs {})",
            omega.len(),
            alive.len()
        )));
    }
    let views = (0..omega.len())
        .map(|i| {
            let neighbors = if alive[i] {
                (0..omega.len())
                    .filter(|&k| k != i && alive[k] && (omega[i] - omega[k]).abs() < big_r)
                    .map(|k| (k, omega[k]))
                    .collect()
            } else {
                Vec::new()
            };
            NeighborView { robot: i, omega: omega[i], neighbors }
        })
        .collect();
    Ok(views)
}

/// Repulsion acting on one robot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Repulsion {
    pub eta: f64,
    /// Number of neighbour gaps that hit the safety cap.
    pub clamped: usize,
}

/// `eta_i = sum_k alpha(|omega_i - omega_k|) sign(omega_i - omega_k)` over the view.
pub fn repulsion(view: &NeighborView, r: f64, big_r: f64) -> Repulsion {
    let mut out = Repulsion::default();
    for &(_, wk) in &view.neighbors {
        let (term, hit) = pair_repulsion(view.omega - wk, r, big_r);
        out.eta += term;
        out.clamped += hit as usize;
    }
    out
}

/// Grid on which pair terms are accumulated: `2^-30`.
///
/// Sums of grid values below `2^23` in magnitude are exact in `f64`, so the
/// pairwise antisymmetry carries over to `sum_i eta_i == 0` bit for bit even
/// when clamped terms reach `1e4` and beyond. The perturbation of each term
/// is at most `2^-31`.
pub const REPULSION_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

/// Signed repulsion contributed by one pair with difference `diff = omega_i - omega_k`.
///
/// The magnitude is rounded to [`REPULSION_QUANTUM`] before the sign is
/// applied, so swapping the pair negates the term exactly.
#[inline]
pub fn pair_repulsion(diff: f64, r: f64, big_r: f64) -> (f64, bool) {
    let s = diff.abs();
    let (a, hit) = alpha_clamped(s, r, big_r);
    let a = (a / REPULSION_QUANTUM).round() * REPULSION_QUANTUM;
    if a == 0.0 {
        return (0.0, hit);
    }
    (if diff < 0.0 { -a } else { a }, hit)
}

/// Velocity command for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    pub u_omega: f64,
}

impl ControlOutput {
    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite()) && self.u_omega.is_finite()
    }
}

fn check_dims(path: &ParametricPath, x: &[f64], gains: &GainSet) -> Result<usize> {
    let n = path.dim();
    if x.len() != n || gains.k.len() != n {
        return Err(Error::contract(format!(
            "dimension mismatch: path {n}, position {}, gains {}",
            x.len(),
            gains.k.len()
        )));
    }
    Ok(n)
}

/// Path-following part of the law evaluated from a precomputed jet.
///
/// Writes `(-1)^n f'_j - k_j phi_j` into `u` and returns
/// `(-1)^n + sum_j k_j phi_j f'_j`.
#[inline]
pub fn field_terms(value: &[f64], d1: &[f64], x: &[f64], k: &[f64], u: &mut [f64]) -> f64 {
    let sign = target_rate(x.len());
    let mut last = sign;
    for j in 0..x.len() {
        let phi = x[j] - value[j];
        u[j] = sign * d1[j] - k[j] * phi;
        last += k[j] * phi * d1[j];
    }
    last
}

/// Distributed guiding-vector-field law for one robot.
///
/// `d_hat` is added to the position command as given; pass the negated
/// disturbance estimate to cancel a disturbance.
pub fn dgvf_control(
    path: &ParametricPath,
    x: &[f64],
    omega: f64,
    omega_hat: f64,
    eta: f64,
    d_hat: &[f64],
    gains: &GainSet,
) -> Result<ControlOutput> {
    let n = check_dims(path, x, gains)?;
    if d_hat.len() != n {
        return Err(Error::contract("disturbance compensation has the wrong dimension"));
    }
    let jet = path.jet(omega);
    let mut u = vec![0.0; n];
    let last = field_terms(&jet.value, &jet.d1, x, &gains.k, &mut u);
    for (uj, dj) in u.iter_mut().zip(d_hat) {
        *uj += dj;
    }
    Ok(ControlOutput { u, u_omega: last - gains.c * (omega - omega_hat) + eta })
}

/// Body-frame velocity references and coordinate rate for a surface vessel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsvGuidance {
    pub eps_r: f64,
    pub v_r: f64,
    pub u_omega: f64,
}

/// Rotates the planar field into the body frame at heading `psi`.
pub fn usv_guidance(
    path: &ParametricPath,
    x: &[f64],
    psi: f64,
    omega: f64,
    omega_hat: f64,
    eta: f64,
    gains: &GainSet,
) -> Result<UsvGuidance> {
    if path.dim() != 2 {
        return Err(Error::config(format!(
            "vessel guidance needs a planar path, got dimension {}",
            path.dim()
        )));
    }
    check_dims(path, x, gains)?;
    let jet = path.jet(omega);
    let mut u = [0.0; 2];
    let last = field_terms(&jet.value, &jet.d1, x, &gains.k, &mut u);
    let (s, c) = psi.sin_cos();
    Ok(UsvGuidance {
        eps_r: u[0] * c + u[1] * s,
        v_r: -u[0] * s + u[1] * c,
        u_omega: last - gains.c * (omega - omega_hat) + eta,
    })
}

/// Fixed neighbour links with prescribed offsets for the fixed-ordering baseline.
///
/// `links[i]` holds `(j, delta)` where `delta` is the desired value of
/// `omega_j - omega_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedOrdering {
    pub links: Vec<Vec<(usize, f64)>>,
}

impl FixedOrdering {
    /// Chain `0 - 1 - ... - n-1` where each robot sits `offset` above its predecessor.
    pub fn chain(n: usize, offset: f64) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        let offsets = vec![offset; edges.len()];
        Self::from_edges(n, &edges, &offsets).expect("chain edges are valid")
    }

    /// Undirected edges `(i, j)` with `offsets[e]` the desired `omega_j - omega_i`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], offsets: &[f64]) -> Result<Self> {
        if edges.len() != offsets.len() {
            return Err(Error::config(format!(
                "fixed ordering has {} edges but {} offsets",
                edges.len(),
                offsets.len()
            )));
        }
        let mut links = vec![Vec::new(); n];
        for (&(i, j), &d) in edges.iter().zip(offsets) {
            if i >= n || j >= n || i == j {
                return Err(Error::config(format!("invalid fixed-ordering edge ({i}, {j})")));
            }
            links[i].push((j, d));
            links[j].push((i, -d));
        }
        Ok(Self { links })
    }
}

/// Consensus-with-offsets law: the field terms plus
/// `sum_j ((omega_j - omega_i) - delta_ij)` over the fixed links.
///
/// `links` pairs each linked neighbour's coordinate with its offset; dead
/// neighbours stay in the list with their frozen coordinates.
pub fn fixed_ordering_control(
    path: &ParametricPath,
    x: &[f64],
    omega: f64,
    links: &[(f64, f64)],
    d_hat: &[f64],
    gains: &GainSet,
) -> Result<ControlOutput> {
    let n = check_dims(path, x, gains)?;
    if d_hat.len() != n {
        return Err(Error::contract("disturbance compensation has the wrong dimension"));
    }
    let jet = path.jet(omega);
    let mut u = vec![0.0; n];
    let last = field_terms(&jet.value, &jet.d1, x, &gains.k, &mut u);
    for (uj, dj) in u.iter_mut().zip(d_hat) {
        *uj += dj;
    }
    let coupling: f64 = links.iter().map(|&(wj, d)| (wj - omega) - d).sum();
    Ok(ControlOutput { u, u_omega: last + coupling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gains(k: &[f64], c: f64) -> GainSet {
        GainSet {
            k: k.to_vec(),
            c,
            sensing_radius: 1.0,
            safe_radius: 0.7,
            gamma1: 20.0,
            gamma2: 0.5,
        }
    }

    #[test]
    fn alpha_examples() {
        assert!((alpha(0.85, 0.7, 1.0).unwrap() - (1.0 / 0.15 - 1.0 / 0.3)).abs() < 1e-12);
        assert!((alpha(0.85, 0.7, 1.0).unwrap() - 3.3333).abs() < 1e-4);
        assert!(alpha(1.0, 0.7, 1.0).unwrap().abs() < 1e-12);
        assert_eq!(alpha(2.0, 0.7, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn alpha_domain() {
        assert!(alpha(0.7, 0.7, 1.0).is_err());
        assert!(alpha(0.5, 0.7, 1.0).is_err());
        assert!(alpha(0.8, 1.0, 0.7).is_err());
    }

    #[test]
    fn alpha_continuous_at_sensing_radius() {
        for e in [1e-3, 1e-6, 1e-9] {
            assert!(alpha(1.0 - e, 0.7, 1.0).unwrap() < 2.0 * e / 0.09);
        }
    }

    #[test]
    fn clamp_hits_below_floor() {
        let (a, hit) = alpha_clamped(0.65, 0.7, 1.0);
        assert!(hit);
        assert!((a - (1.0 / (1e-4 * 0.3) - 1.0 / 0.3)).abs() < 1e-6);
        assert!(!alpha_clamped(0.8, 0.7, 1.0).1);
    }

    #[test]
    fn neighbors_examples() {
        let v = sensing_neighbors(&[0.0, 0.5, 1.2], &[true; 3], 0.6).unwrap();
        assert_eq!(v[0].neighbors, vec![(1, 0.5)]);
        assert_eq!(v[1].neighbors, vec![(0, 0.0)]);
        assert!(v[2].neighbors.is_empty());

        let v = sensing_neighbors(&[0.3], &[true], 0.6).unwrap();
        assert!(v[0].neighbors.is_empty());

        let v = sensing_neighbors(&[0.0, 0.5, 1.2], &[true, false, true], 0.6).unwrap();
        assert!(v.iter().all(|n| n.neighbors.is_empty()));

        assert!(sensing_neighbors(&[0.0, 1.0], &[true], 0.6).is_err());
    }

    #[test]
    fn repulsion_examples() {
        let view = NeighborView { robot: 0, omega: 0.0, neighbors: vec![(1, 0.8)] };
        let rep = repulsion(&view, 0.7, 1.0);
        assert!((rep.eta + 6.6667).abs() < 1e-4);
        assert_eq!(rep.clamped, 0);

        let view = NeighborView { robot: 0, omega: 0.0, neighbors: vec![] };
        assert_eq!(repulsion(&view, 0.7, 1.0).eta, 0.0);

        let view = NeighborView { robot: 0, omega: 0.0, neighbors: vec![(1, 0.8), (2, -0.8)] };
        assert_eq!(repulsion(&view, 0.7, 1.0).eta, 0.0);
    }

    #[test]
    fn dgvf_examples() {
        let c = ParametricPath::unit_circle();
        let g = gains(&[1.0, 1.0], 1.0);
        let out = dgvf_control(&c, &[1.0, 0.0], 0.0, 0.0, 0.0, &[0.0, 0.0], &g).unwrap();
        assert_eq!(out.u, vec![0.0, 1.0]);
        assert_eq!(out.u_omega, 1.0);

        let out = dgvf_control(&c, &[1.0, 0.0], 0.0, 0.5, 0.0, &[0.0, 0.0], &g).unwrap();
        assert_eq!(out.u_omega, 1.5);

        let out = dgvf_control(&c, &[1.0, 0.0], 0.0, 0.0, 6.6667, &[0.0, 0.0], &g).unwrap();
        assert!((out.u_omega - 7.6667).abs() < 1e-12);

        let out = dgvf_control(&c, &[1.0, 0.0], 0.0, 0.0, 0.0, &[0.1, -0.2], &g).unwrap();
        assert_eq!(out.u, vec![0.1, 0.8]);
    }

    #[test]
    fn target_rate_parity() {
        assert_eq!(target_rate(2), 1.0);
        assert_eq!(target_rate(3), -1.0);
        assert_eq!(target_rate(4), 1.0);
    }

    #[test]
    fn usv_guidance_examples() {
        let c = ParametricPath::unit_circle();
        let g = gains(&[1.0, 1.0], 2.0);
        let out = usv_guidance(&c, &[1.0, 0.0], 0.0, 0.0, 0.0, 0.0, &g).unwrap();
        assert!(out.eps_r.abs() < 1e-15 && (out.v_r - 1.0).abs() < 1e-15);
        let out = usv_guidance(&c, &[1.0, 0.0], PI / 2.0, 0.0, 0.0, 0.0, &g).unwrap();
        assert!((out.eps_r - 1.0).abs() < 1e-15 && out.v_r.abs() < 1e-15);
        assert_eq!(out.u_omega, 1.0);
    }

    #[test]
    fn usv_guidance_zero_field() {
        // Straight line f(w) = (0, 0) has zero derivative, so on-path the
        // field vanishes and only the coordinate terms remain.
        let p = ParametricPath::custom(
            "still",
            vec![
                crate::paths::Component::new(|_| 0.0, |_| 0.0, |_| 0.0),
                crate::paths::Component::new(|_| 0.0, |_| 0.0, |_| 0.0),
            ],
            None,
        )
        .unwrap();
        let g = gains(&[1.0, 1.0], 2.0);
        let out = usv_guidance(&p, &[0.0, 0.0], 0.3, 1.0, 0.5, 0.25, &g).unwrap();
        assert_eq!((out.eps_r, out.v_r), (0.0, 0.0));
        assert_eq!(out.u_omega, 1.0 - 2.0 * 0.5 + 0.25);
    }

    #[test]
    fn usv_guidance_needs_plane() {
        let p = crate::paths::builtin_path(crate::paths::PathKind::Lissajous3d, 1.0, 0.0).unwrap();
        let g = gains(&[1.0, 1.0, 1.0], 2.0);
        assert!(matches!(
            usv_guidance(&p, &[0.0, 0.0, 0.0], 0.0, 0.0, 0.0, 0.0, &g),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fixed_ordering_at_offset() {
        let c = ParametricPath::unit_circle();
        let g = gains(&[1.0, 1.0], 1.0);
        let d = 2.0 * PI / 15.0;
        let topo = FixedOrdering::chain(2, d);
        assert_eq!(topo.links[0], vec![(1, d)]);
        assert_eq!(topo.links[1], vec![(0, -d)]);
        let (w0, w1) = (0.0, d);
        let out = fixed_ordering_control(&c, &[1.0, 0.0], w0, &[(w1, d)], &[0.0, 0.0], &g).unwrap();
        assert_eq!(out.u_omega, 1.0);
        let x1 = c.eval(w1);
        let out = fixed_ordering_control(&c, &x1, w1, &[(w0, -d)], &[0.0, 0.0], &g).unwrap();
        assert!((out.u_omega - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_ordering_needs_offsets() {
        assert!(FixedOrdering::from_edges(3, &[(0, 1), (1, 2)], &[0.1]).is_err());
        assert!(FixedOrdering::from_edges(3, &[(0, 3)], &[0.1]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn repulsion_sums_to_zero(omega in proptest::collection::vec(-2.0f64..2.0, 2..12)) {
            let alive = vec![true; omega.len()];
            let views = sensing_neighbors(&omega, &alive, 0.6).unwrap();
            let total: f64 = views.iter().map(|v| repulsion(v, 0.4, 0.6).eta).sum();
            proptest::prop_assert_eq!(total, 0.0);
        }

        #[test]
        fn pair_terms_are_antisymmetric(diff in -1.0f64..1.0) {
            let (a, ha) = pair_repulsion(diff, 0.4, 0.6);
            let (b, hb) = pair_repulsion(-diff, 0.4, 0.6);
            proptest::prop_assert_eq!(a, -b);
            proptest::prop_assert_eq!(ha, hb);
        }
    }
}
