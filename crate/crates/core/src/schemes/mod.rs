//! Proximal steps, the augmented space `X × X × ℝ`, and the approximation
//! schemes for barycenters.

mod lln;
mod nodice;

pub use lln::{run_empirical_lln, run_lln, EmpiricalLlnRecord, LlnSummary};
pub use nodice::run_nodice;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spaces::GeodesicSpace;

/// The resolvent of `d²(z, ·)` with step `τ` applied at `x`: the point
/// `γ(1/(2τ+1))` on the geodesic from `z` to `x`.
pub fn proximal_sqdist<S: GeodesicSpace>(space: &S, z: &S::Point, x: &S::Point, tau: f64) -> Result<S::Point> {
    if !(tau.is_finite() && tau > 0.0) {
        return invalid(format!("step tau must be positive, got {tau}"));
    }
    Ok(space.geodesic_unchecked(z, x, 1.0 / (2.0 * tau + 1.0)))
}

/// `min(1/τ, 2d/δ)`, read as `1/τ` when `δ = 0`.
fn branch(tau: f64, d: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        (1.0 / tau).min(2.0 * d / delta)
    } else {
        1.0 / tau
    }
}

/// The constant `Θ` of the one-step estimate for the proximal map of
/// `d²(z, ·)` at `x`, with `y` the proximal point and `w` the comparison point.
pub fn theta(d_zw: f64, d_wy: f64, d_zy: f64, tau: f64, delta: f64) -> f64 {
    let first = 8.0 * d_zw + 8.0 * delta;
    let second = (4.0 * d_wy + 8.0 * tau * d_zy) * branch(tau, d_zy, delta);
    first.max(second)
}

/// `Θ` with every distance replaced by the diameter `D` of a region
/// containing all points involved.
pub fn theta_omega(d: f64, tau: f64, delta: f64) -> f64 {
    let first = 8.0 * d + 8.0 * delta;
    let second = (4.0 + 8.0 * tau) * d * branch(tau, d, delta);
    first.max(second)
}

/// A point `(x, y, r)` of `X × X × ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub struct AugmentedPoint<P> {
    pub x: P,
    pub y: P,
    pub r: f64,
}

impl<P> AugmentedPoint<P> {
    pub fn new(x: P, y: P, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return invalid(format!("augmented coordinate r must be nonnegative, got {r}"));
        }
        Ok(Self { x, y, r })
    }

    /// Whether `d(x, y) ≤ r`, i.e. the point lies in the set `A`.
    pub fn in_a<S: GeodesicSpace<Point = P>>(&self, space: &S) -> bool {
        space.distance(&self.x, &self.y) <= self.r
    }
}

/// The product metric `√(d²(x,p) + d²(y,q) + (r-s)²)`.
pub fn product_metric<S: GeodesicSpace>(space: &S, a: &AugmentedPoint<S::Point>, b: &AugmentedPoint<S::Point>) -> f64 {
    product_sq(space, a, b).sqrt()
}

pub(crate) fn product_sq<S: GeodesicSpace>(space: &S, a: &AugmentedPoint<S::Point>, b: &AugmentedPoint<S::Point>) -> f64 {
    let dx = space.distance(&a.x, &b.x);
    let dy = space.distance(&a.y, &b.y);
    let dr = a.r - b.r;
    dx * dx + dy * dy + dr * dr
}

/// Distance from `a` to `A = {d(x,y) ≤ r}` and the nearest point of `A`.
///
/// Outside `A` the nearest point moves each of `x`, `y` a length
/// `λ = (d(x,y) - r)/3` towards the other and raises `r` by `λ`.
pub fn dist_to_a<S: GeodesicSpace>(space: &S, a: &AugmentedPoint<S::Point>) -> (f64, AugmentedPoint<S::Point>) {
    let d = space.distance(&a.x, &a.y);
    if d <= a.r {
        return (0.0, a.clone());
    }
    let lambda = (d - a.r) / 3.0;
    let t = lambda / d;
    let projection = AugmentedPoint {
        x: space.geodesic_unchecked(&a.x, &a.y, t),
        y: space.geodesic_unchecked(&a.x, &a.y, 1.0 - t),
        r: a.r + lambda,
    };
    ((d - a.r) / 3f64.sqrt(), projection)
}

/// Region used for the diameter `D_Ω`. Only the post-hoc choice is
/// available: the diameter of everything the run touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaMode {
    #[default]
    Posthoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub tau: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Cycles (deterministic scheme) or steps (stochastic scheme) to run;
    /// `None` runs exactly as many as the `k0` bound allows.
    pub max_steps: Option<usize>,
    pub delta: f64,
    pub omega_mode: OmegaMode,
}

impl SchemeConfig {
    pub fn new(tau: f64, epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        let cfg = Self { tau, epsilon, seed, max_steps: None, delta, omega_mode: OmegaMode::Posthoc };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return invalid(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return invalid(format!("delta must be nonnegative, got {}", self.delta));
        }
        Ok(())
    }
}

/// Steps to run for a `k0` bound: the configured count, else the bound
/// rounded up, and never fewer than one.
pub(crate) fn steps_for(bound: f64, max_steps: Option<usize>) -> usize {
    max_steps.unwrap_or_else(|| (bound.ceil() as usize).max(1))
}

/// One run of a scheme. Index `k` refers to cycle `k` for the deterministic
/// scheme and step `k` for the stochastic one; `iterates[k]` is the point
/// after `k` cycles or steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub struct TrajectoryRecord<P> {
    pub iterates: Vec<P>,
    pub objective_values: Vec<f64>,
    pub d2_to_reference: Vec<f64>,
    pub k0: Option<usize>,
    /// The bound `k0` must stay below.
    pub k0_bound: f64,
    pub bound_rhs: f64,
    pub d_omega: f64,
    pub theta_omega: f64,
    pub delta: f64,
    /// Distance bound at `k0` and whether `d(p, iterate at k0)` meets it.
    pub distance_bound: Option<f64>,
    pub distance_at_k0: Option<f64>,
    /// Largest `lhs - rhs` of the per-step descent inequality.
    pub descent_max_violation: f64,
    pub violation: bool,
    pub omega_mode: OmegaMode,
}

/// Absolute slack allowed on squared-distance comparisons.
pub(crate) const SLACK: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{MetricTree, TreePoint};

    #[test]
    fn prox_cases() {
        let t = MetricTree::path(&[3.0]).unwrap();
        let (z, x) = (TreePoint::Vertex(0), TreePoint::Vertex(1));
        let y = proximal_sqdist(&t, &z, &x, 1.0).unwrap();
        assert!((t.distance(&z, &y) - 1.0).abs() < 1e-15);
        // Grid oracle for y ↦ d²(z,y) + d²(x,y)/(2τ) on [0, 3].
        let obj = |s: f64| s * s + (3.0 - s) * (3.0 - s) / 2.0;
        assert_eq!(obj(1.0), 3.0);
        for i in 0..=200 {
            assert!(obj(1.0) <= obj(3.0 * i as f64 / 200.0) + 1e-12);
        }
        let mid = proximal_sqdist(&t, &z, &x, 0.5).unwrap();
        assert!((t.distance(&z, &mid) - 1.5).abs() < 1e-15);
        let far = proximal_sqdist(&t, &z, &x, 1e9).unwrap();
        assert!(t.distance(&z, &far) < 1e-8);
        assert!(proximal_sqdist(&t, &z, &x, 0.0).is_err());
    }

    #[test]
    fn theta_arithmetic() {
        assert_eq!(theta(1.0, 2.0, 1.0, 1.0, 0.0), 16.0);
        assert_eq!(theta(0.0, 0.0, 0.0, 1.0, 0.0), 0.0);
        assert_eq!(theta(1.0, 2.0, 1.0, 1.0, 0.1), 16.0);
        assert_eq!(theta_omega(0.0, 1.0, 0.3), 8.0 * 0.3);
        assert_eq!(theta_omega(1.0, 1.0, 0.0), 12.0);
    }

    #[test]
    fn theta_omega_branch_crossover() {
        for &d in &[0.5, 1.0, 2.0, 4.0] {
            for &tau in &[0.05, 0.1, 1.0, 5.0] {
                for i in 0..=40 {
                    let delta = d * i as f64 / 20.0;
                    let factor = if delta == 0.0 { 1.0 / tau } else { f64::min(1.0 / tau, 2.0 * d / delta) };
                    let brute = f64::max(8.0 * d + 8.0 * delta, (4.0 + 8.0 * tau) * d * factor);
                    assert_eq!(theta_omega(d, tau, delta), brute);
                    assert_eq!(theta_omega(d, tau, delta), theta(d, d, d, tau, delta));
                }
            }
        }
    }

    #[test]
    fn product_metric_cases() {
        let t = MetricTree::path(&[1.0, 2.0]).unwrap();
        let v = |i| TreePoint::Vertex(i);
        let a = AugmentedPoint::new(v(0), v(1), 0.0).unwrap();
        assert_eq!(product_metric(&t, &a, &a), 0.0);
        let b = AugmentedPoint::new(v(0), v(1), 3.0).unwrap();
        assert_eq!(product_metric(&t, &a, &b), 3.0);
        let c = AugmentedPoint::new(v(1), v(2), 2.0).unwrap();
        let d = AugmentedPoint::new(v(0), v(1), 0.0).unwrap();
        // d(x,p) = 1, d(y,q) = 2, r - s = 2
        assert_eq!(product_metric(&t, &c, &AugmentedPoint { r: 0.0, ..d }), 3.0);
        assert!(AugmentedPoint::new(v(0), v(1), -1.0).is_err());
    }

    #[test]
    fn projection_onto_a() {
        let t = MetricTree::path(&[3.0]).unwrap();
        let a = AugmentedPoint::new(TreePoint::Vertex(0), TreePoint::Vertex(1), 0.0).unwrap();
        let (dist, proj) = dist_to_a(&t, &a);
        assert!((dist - 3f64.sqrt()).abs() < 1e-15);
        assert!((t.distance(&a.x, &proj.x) - 1.0).abs() < 1e-15);
        assert!((t.distance(&a.y, &proj.y) - 1.0).abs() < 1e-15);
        assert_eq!(proj.r, 1.0);
        assert!((t.distance(&proj.x, &proj.y) - proj.r).abs() < 1e-15);
        assert!((product_metric(&t, &a, &proj) - dist).abs() < 1e-15);
        let inside = AugmentedPoint::new(TreePoint::Vertex(0), TreePoint::Vertex(0), 0.0).unwrap();
        assert_eq!(dist_to_a(&t, &inside), (0.0, inside.clone()));
    }

    #[test]
    fn config_validation() {
        assert!(SchemeConfig::new(0.1, 0.01, 0.0, 1).is_ok());
        assert!(SchemeConfig::new(0.0, 0.01, 0.0, 1).is_err());
        assert!(SchemeConfig::new(0.1, 0.0, 0.0, 1).is_err());
        assert!(SchemeConfig::new(0.1, 0.01, -1.0, 1).is_err());
        assert_eq!(steps_for(0.0, None), 1);
        assert_eq!(steps_for(7.2, None), 8);
        assert_eq!(steps_for(7.2, Some(3)), 3);
    }
}
