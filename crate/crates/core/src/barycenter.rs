//! The 𝐕 functional, barycenters and barycentric sets.
//!
//! For a measure `μ` and a base point `x0`,
//! `V(x) = Σ w_i (d²(x, z_i) - d²(x0, z_i))`. The base point only shifts `V`
//! by a constant; throughout the crate it is the first support point of `μ`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spaces::disk::{from_origin, to_origin};
use crate::spaces::{
    DiskPoint, EuclideanPlane, GeodesicSpace, MetricTree, PlanePoint, PoincareDisk, TreePoint,
};
use crate::transport::{w2_variance, DiscreteMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactTree,
    ExactPlane,
    DiskDescent,
    Grid,
}

/// A computed barycenter together with a certified lower estimate of
/// `inf V`. `value` and `v_inf_estimate` use the first support point as base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub struct BarycenterResult<P> {
    pub point: P,
    pub value: f64,
    pub method: Method,
    pub v_inf_estimate: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping threshold on the Riemannian gradient norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

pub fn v_functional<S: GeodesicSpace>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    x: &S::Point,
    x0: &S::Point,
) -> f64 {
    mu.iter()
        .map(|(z, w)| {
            let a = space.distance(x, z);
            let b = space.distance(x0, z);
            w * (a - b) * (a + b)
        })
        .sum()
}

/// `V` with the crate's default base point.
pub fn base_value<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, x: &S::Point) -> f64 {
    v_functional(space, mu, x, &mu.support()[0])
}

/// Spaces with a barycenter solver.
pub trait Barycentric: GeodesicSpace {
    fn barycenter(
        &self,
        mu: &DiscreteMeasure<Self::Point>,
        opts: &SolverOptions,
    ) -> Result<BarycenterResult<Self::Point>>;
}

impl Barycentric for MetricTree {
    fn barycenter(&self, mu: &DiscreteMeasure<TreePoint>, _: &SolverOptions) -> Result<BarycenterResult<TreePoint>> {
        tree_barycenter(self, mu)
    }
}

impl Barycentric for PoincareDisk {
    fn barycenter(&self, mu: &DiscreteMeasure<DiskPoint>, opts: &SolverOptions) -> Result<BarycenterResult<DiskPoint>> {
        disk_barycenter(self, mu, opts.tol, opts.max_iter)
    }
}

impl Barycentric for EuclideanPlane {
    fn barycenter(&self, mu: &DiscreteMeasure<PlanePoint>, _: &SolverOptions) -> Result<BarycenterResult<PlanePoint>> {
        let (mut x, mut y) = (0.0, 0.0);
        for (p, w) in mu.iter() {
            x += w * p.x;
            y += w * p.y;
        }
        let point = PlanePoint::new(x, y);
        let value = base_value(self, mu, &point);
        Ok(BarycenterResult {
            point,
            value,
            method: Method::ExactPlane,
            v_inf_estimate: value,
            tolerance: 0.0,
            iterations: 0,
        })
    }
}

/// Signed arc-length positions of the atoms relative to an edge: a point at
/// offset `s` is at distance `|s - c_i|` from atom `i`.
fn edge_positions(tree: &MetricTree, edge: usize, mu: &DiscreteMeasure<TreePoint>) -> Vec<f64> {
    let e = &tree.edges()[edge];
    let (u, v) = (TreePoint::Vertex(e.u), TreePoint::Vertex(e.v));
    mu.support()
        .iter()
        .map(|z| match *z {
            TreePoint::Edge { edge: k, offset } if k == edge => offset,
            _ => {
                let du = tree.distance(&u, z);
                let dv = tree.distance(&v, z);
                if du <= dv {
                    -du
                } else {
                    e.length + dv
                }
            }
        })
        .collect()
}

/// Exact minimiser of `x ↦ Σ w_i d²(x, z_i)`.
///
/// Restricted to an edge the objective is a quadratic in arc length, so the
/// edge minimiser is the clamped weighted mean of the atom positions.
pub fn tree_barycenter(tree: &MetricTree, mu: &DiscreteMeasure<TreePoint>) -> Result<BarycenterResult<TreePoint>> {
    crate::transport::validate_measure(tree, mu)?;
    let mut best: Option<(f64, usize, f64)> = None;
    for (k, e) in tree.edges().iter().enumerate() {
        let c = edge_positions(tree, k, mu);
        let mean: f64 = c.iter().zip(mu.weights()).map(|(c, w)| c * w).sum();
        let s = mean.clamp(0.0, e.length);
        let f: f64 = c.iter().zip(mu.weights()).map(|(c, w)| w * (s - c) * (s - c)).sum();
        if best.is_none_or(|(b, _, _)| f < b) {
            best = Some((f, k, s));
        }
    }
    let point = match best {
        Some((_, k, s)) => tree.edge_point(k, s)?,
        None => TreePoint::Vertex(0),
    };
    let value = base_value(tree, mu, &point);
    Ok(BarycenterResult {
        point,
        value,
        method: Method::ExactTree,
        v_inf_estimate: value,
        tolerance: 0.0,
        iterations: 0,
    })
}

/// Grid search over every edge with arc-length step `step`.
///
/// The objective has curvature 2 along edges, so the grid minimum exceeds
/// the true minimum by at most `step² / 4`; that is the reported tolerance.
pub fn tree_grid_barycenter(
    tree: &MetricTree,
    mu: &DiscreteMeasure<TreePoint>,
    step: f64,
) -> Result<BarycenterResult<TreePoint>> {
    if !(step.is_finite() && step > 0.0) {
        return invalid(format!("grid step must be positive, got {step}"));
    }
    let mut best = (f64::INFINITY, TreePoint::Vertex(0));
    let objective = |x: &TreePoint| w2_variance(tree, mu, x);
    if tree.edges().is_empty() {
        best.0 = objective(&best.1);
    }
    for (k, e) in tree.edges().iter().enumerate() {
        let n = (e.length / step).ceil() as usize;
        for i in 0..=n {
            let s = (i as f64 * step).min(e.length);
            let x = tree.edge_point(k, s)?;
            let f = objective(&x);
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    let point = best.1;
    let value = base_value(tree, mu, &point);
    let tolerance = step * step / 4.0;
    Ok(BarycenterResult {
        point,
        value,
        method: Method::Grid,
        v_inf_estimate: value - tolerance,
        tolerance,
        iterations: 0,
    })
}

/// `Σ w_i d_i u_i` in the Möbius frame centred at `x`, where `u_i` is the
/// unit direction towards `z_i`. Minus half the Riemannian gradient.
fn descent_direction(disk: &PoincareDisk, mu: &DiscreteMeasure<DiskPoint>, x: &DiskPoint) -> Complex64 {
    let a = x.as_complex();
    let mut v = Complex64::new(0.0, 0.0);
    for (z, w) in mu.iter() {
        let image = to_origin(a, z.as_complex());
        let r = image.norm();
        if r > 0.0 {
            v += image * (w * disk.distance(x, z) / r);
        }
    }
    v
}

/// Newton direction `H⁻¹ (2v)` in the same frame. The Hessian of `d²(z, ·)`
/// is `2` along `u` and `2 d coth d` across it, so `H ⪰ 2`.
fn newton_direction(disk: &PoincareDisk, mu: &DiscreteMeasure<DiskPoint>, x: &DiskPoint, v: Complex64) -> Complex64 {
    let a = x.as_complex();
    let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
    for (z, w) in mu.iter() {
        let image = to_origin(a, z.as_complex());
        let r = image.norm();
        let d = disk.distance(x, z);
        let across = if d > 1e-8 { d / d.tanh() } else { 1.0 + d * d / 3.0 };
        if r > 0.0 {
            let (ux, uy) = (image.re / r, image.im / r);
            hxx += 2.0 * w * (ux * ux + across * (1.0 - ux * ux));
            hxy += 2.0 * w * (ux * uy - across * ux * uy);
            hyy += 2.0 * w * (uy * uy + across * (1.0 - uy * uy));
        } else {
            hxx += 2.0 * w;
            hyy += 2.0 * w;
        }
    }
    let det = hxx * hyy - hxy * hxy;
    let (gx, gy) = (2.0 * v.re, 2.0 * v.im);
    Complex64::new((hyy * gx - hxy * gy) / det, (hxx * gy - hxy * gx) / det)
}

/// Riemannian Newton iteration for the Fréchet mean on the disk.
///
/// Steps follow the geodesic from the current iterate along the Newton
/// direction, halving until an Armijo decrease. The objective is 2-strongly
/// geodesically convex, so a gradient `g` certifies `V(x) - inf V ≤ |g|²/4`.
pub fn disk_barycenter(
    disk: &PoincareDisk,
    mu: &DiscreteMeasure<DiskPoint>,
    tol: f64,
    max_iter: usize,
) -> Result<BarycenterResult<DiskPoint>> {
    if !(tol.is_finite() && tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    crate::transport::validate_measure(disk, mu)?;
    let mut x = mu.support()[0];
    let mut f = w2_variance(disk, mu, &x);
    for iter in 0..=max_iter {
        let v = descent_direction(disk, mu, &x);
        let g = 2.0 * v.norm();
        if g <= tol {
            let value = base_value(disk, mu, &x);
            let gap = g * g / 4.0;
            return Ok(BarycenterResult {
                point: x,
                value,
                method: Method::DiskDescent,
                v_inf_estimate: value - gap,
                tolerance: gap,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }
        let step = newton_direction(disk, mu, &x, v);
        let dir = step / step.norm();
        // Decrease predicted by the first-order model per unit of `t`.
        let slope = 2.0 * (v.re * step.re + v.im * step.im);
        let a = x.as_complex();
        // Below the rounding noise of `f` the decrease cannot be resolved;
        // there the gradient norm serves as the merit function instead.
        let resolvable = slope > 1e3 * f64::EPSILON * f;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let len = t * step.norm();
            let cand = DiskPoint::from_complex(from_origin(a, dir * (len / 2.0).tanh()));
            let fc = w2_variance(disk, mu, &cand);
            let accept = if resolvable {
                fc <= f - 1e-4 * t * slope
            } else {
                2.0 * descent_direction(disk, mu, &cand).norm() < g
            };
            if accept {
                x = cand;
                f = fc;
                moved = true;
                break;
            }
            t /= 2.0;
        }
        if !moved {
            return Err(Error::Convergence {
                iterations: iter,
                gradient_norm: g,
                last_iterate: [x.x, x.y],
            });
        }
    }
    let g = 2.0 * descent_direction(disk, mu, &x).norm();
    Err(Error::Convergence { iterations: max_iter, gradient_norm: g, last_iterate: [x.x, x.y] })
}

/// Whether `V(x) ≤ v_inf + ε`, with `v_inf` relative to the first support point.
pub fn barycentric_membership<S: GeodesicSpace>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    x: &S::Point,
    epsilon: f64,
    v_inf: f64,
) -> bool {
    base_value(space, mu, x) <= v_inf + epsilon
}

/// Upper bound on `d(x, y)` for `x ∈ 𝓑(μ,ε1)`, `y ∈ 𝓑(μ,ε2)`, where
/// `W1_x`, `W1_y` are the first moments of `μ` about `x` and `y`.
pub fn barycentric_diameter_bound(w1_x: f64, w1_y: f64, delta: f64, eps1: f64, eps2: f64) -> f64 {
    (8.0 * delta * (w1_x + w1_y) + 16.0 * delta * delta + 2.0 * (eps1 + eps2)).sqrt()
}

/// Draws a point of `𝓑(μ,ε)` by rejection.
///
/// Proposals lie on the geodesic from the barycenter towards a random point
/// `r`, at a parameter scaled so that roughly the quadratic growth of `V`
/// stays within `ε`. Membership is tested against the certified lower
/// estimate of `inf V`, so every accepted point is a true member. Falls back
/// to the barycenter itself after `attempts` rejections.
pub fn sample_barycentric_point<S: GeodesicSpace, R: Rng + ?Sized>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    bary: &BarycenterResult<S::Point>,
    epsilon: f64,
    attempts: usize,
    rng: &mut R,
) -> S::Point {
    if epsilon <= 0.0 {
        return bary.point.clone();
    }
    for _ in 0..attempts {
        let r = space.random_point(rng);
        let gap = base_value(space, mu, &r) - bary.v_inf_estimate;
        let t_max = if gap > 0.0 { (2.0 * (epsilon / gap).sqrt()).min(1.0) } else { 1.0 };
        let t = rng.random::<f64>() * t_max;
        let x = space.geodesic_unchecked(&bary.point, &r, t);
        if barycentric_membership(space, mu, &x, epsilon, bary.v_inf_estimate) {
            return x;
        }
    }
    bary.point.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn segment(len: f64) -> MetricTree {
        MetricTree::path(&[len]).unwrap()
    }

    #[test]
    fn v_functional_cases() {
        let t = MetricTree::path(&[1.0, 1.0, 1.0]).unwrap();
        let z = TreePoint::Vertex(3);
        let mu = DiscreteMeasure::dirac(z);
        let x = TreePoint::Vertex(1);
        let x0 = TreePoint::Vertex(0);
        assert_eq!(v_functional(&t, &mu, &x, &x), 0.0);
        assert_eq!(v_functional(&t, &mu, &x, &x0), 4.0 - 9.0);
    }

    #[test]
    fn tree_barycenter_cases() {
        let t = MetricTree::path(&[1.0, 2.0]).unwrap();
        let z = t.edge_point(1, 0.5).unwrap();
        assert_eq!(tree_barycenter(&t, &DiscreteMeasure::dirac(z)).unwrap().point, z);
        let mu = DiscreteMeasure::uniform(vec![TreePoint::Vertex(0), TreePoint::Vertex(2)]).unwrap();
        let b = tree_barycenter(&t, &mu).unwrap();
        assert_eq!(b.point, t.edge_point(1, 0.5).unwrap());

        let star = MetricTree::star(&[1.0, 1.0, 1.0]).unwrap();
        let leaves = DiscreteMeasure::uniform((1..4).map(TreePoint::Vertex).collect()).unwrap();
        let b = tree_barycenter(&star, &leaves).unwrap();
        assert_eq!(b.point, TreePoint::Vertex(0));
        let grid = tree_grid_barycenter(&star, &leaves, 1e-4).unwrap();
        assert!(w2_variance(&star, &leaves, &b.point) <= w2_variance(&star, &leaves, &grid.point));
        assert_eq!(grid.point, TreePoint::Vertex(0));
    }

    #[test]
    fn membership_gap_on_a_segment() {
        // V(1) - V(2) = (1 + 9)/2 - (4 + 4)/2 = 1.
        let t = segment(4.0);
        let mu = DiscreteMeasure::uniform(vec![TreePoint::Vertex(0), TreePoint::Vertex(1)]).unwrap();
        let b = tree_barycenter(&t, &mu).unwrap();
        let x = t.edge_point(0, 1.0).unwrap();
        assert!(!barycentric_membership(&t, &mu, &x, 0.9, b.v_inf_estimate));
        assert!(barycentric_membership(&t, &mu, &x, 1.0, b.v_inf_estimate));
        assert!(barycentric_membership(&t, &mu, &b.point, 0.0, b.v_inf_estimate));
        assert!(barycentric_membership(&t, &mu, &TreePoint::Vertex(0), 1e9, b.v_inf_estimate));
    }

    #[test]
    fn diameter_bound_arithmetic() {
        assert_eq!(barycentric_diameter_bound(3.0, 4.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(barycentric_diameter_bound(3.0, 4.0, 0.0, 1.0, 1.0), 2.0);
        assert_abs_diff_eq!(barycentric_diameter_bound(1.0, 1.0, 1.0, 0.0, 0.0), 32f64.sqrt());
    }

    #[test]
    fn disk_barycenter_cases() {
        let disk = PoincareDisk::default();
        let z = DiskPoint::new(0.3, -0.2);
        let b = disk_barycenter(&disk, &DiscreteMeasure::dirac(z), 1e-10, 100).unwrap();
        assert!(disk.distance(&b.point, &z) < 1e-10);

        let z2 = DiskPoint::new(-0.5, 0.4);
        let mu = DiscreteMeasure::uniform(vec![z, z2]).unwrap();
        let b = disk_barycenter(&disk, &mu, 1e-10, 1000).unwrap();
        let mid = disk.geodesic_point(&z, &z2, 0.5).unwrap();
        assert!(disk.distance(&b.point, &mid) < 1e-9);
        assert!(b.value >= b.v_inf_estimate - b.tolerance);
    }

    #[test]
    fn disk_barycenter_respects_reflection_symmetry() {
        let disk = PoincareDisk::default();
        let pts = vec![DiskPoint::new(0.1, 0.6), DiskPoint::new(0.1, -0.6), DiskPoint::new(0.7, 0.0)];
        let mu = DiscreteMeasure::uniform(pts.clone()).unwrap();
        let b = disk_barycenter(&disk, &mu, 1e-12, 1000).unwrap();
        assert!(b.point.y.abs() < 1e-12);
        let reflected = DiscreteMeasure::uniform(pts.iter().map(|p| DiskPoint::new(p.x, -p.y)).collect()).unwrap();
        let r = disk_barycenter(&disk, &reflected, 1e-12, 1000).unwrap();
        assert!(disk.distance(&b.point, &r.point) < 1e-10);
    }

    #[test]
    fn disk_barycenter_reports_non_convergence() {
        let disk = PoincareDisk::default();
        let mu = DiscreteMeasure::uniform(vec![DiskPoint::new(0.9, 0.0), DiskPoint::new(-0.9, 0.1)]).unwrap();
        match disk_barycenter(&disk, &mu, 1e-10, 0) {
            Err(Error::Convergence { iterations: 0, .. }) => {}
            other => panic!("expected a convergence error, got {other:?}"),
        }
        assert!(disk_barycenter(&disk, &mu, 0.0, 10).is_err());
    }

    #[test]
    fn plane_barycenter_is_the_mean() {
        let plane = EuclideanPlane::default();
        let mu = DiscreteMeasure::new(vec![PlanePoint::new(0.0, 0.0), PlanePoint::new(3.0, 3.0)], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let b = plane.barycenter(&mu, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(b.point.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.point.y, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sampled_points_are_members() {
        let t = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let mu = DiscreteMeasure::uniform((1..4).map(TreePoint::Vertex).collect()).unwrap();
        let b = tree_barycenter(&t, &mu).unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..200 {
            let x = sample_barycentric_point(&t, &mu, &b, 0.5, 64, &mut rng);
            assert!(barycentric_membership(&t, &mu, &x, 0.5, b.v_inf_estimate));
        }
        assert_eq!(sample_barycentric_point(&t, &mu, &b, 0.0, 64, &mut rng), b.point);
    }
}
