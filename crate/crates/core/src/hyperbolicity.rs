//! Gromov products, the four-point condition, hyperbolicity-constant
//! estimation and the comparison tripod of a geodesic triangle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{stream_id, stream_rng};
use crate::spaces::GeodesicSpace;
use rand::Rng;

const DELTA_STREAM_TAG: u32 = 1;
const CHUNK: u64 = 4096;

/// Gromov product `(y|z)_x`.
pub fn gromov_product<S: GeodesicSpace>(space: &S, y: &S::Point, z: &S::Point, x: &S::Point) -> f64 {
    0.5 * (space.distance(x, y) + space.distance(x, z) - space.distance(y, z))
}

/// `min{(x|y)_p, (y|z)_p} - (x|z)_p`. A space is δ-hyperbolic iff this never
/// exceeds δ.
pub fn four_point_defect<S: GeodesicSpace>(
    space: &S,
    p: &S::Point,
    x: &S::Point,
    y: &S::Point,
    z: &S::Point,
) -> f64 {
    let xy = gromov_product(space, x, y, p);
    let yz = gromov_product(space, y, z, p);
    let xz = gromov_product(space, x, z, p);
    xy.min(yz) - xz
}

/// Defect of the ordering `(p, x, y, z) = (o[0], o[1], o[2], o[3])` from a
/// distance table.
fn defect_from_table(d: &[[f64; 4]; 4], o: [usize; 4]) -> f64 {
    let [p, x, y, z] = o;
    let gp = |a: usize, b: usize| 0.5 * (d[p][a] + d[p][b] - d[a][b]);
    gp(x, y).min(gp(y, z)) - gp(x, z)
}

const PERMUTATIONS: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

/// Largest four-point defect over all orderings of a quadruple, with the
/// maximising ordering.
pub fn quadruple_defect<S: GeodesicSpace>(space: &S, pts: [&S::Point; 4]) -> (f64, [usize; 4]) {
    let mut d = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = space.distance(pts[i], pts[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let mut best = (f64::NEG_INFINITY, PERMUTATIONS[0]);
    for o in PERMUTATIONS {
        let v = defect_from_table(&d, o);
        if v > best.0 {
            best = (v, o);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMode {
    ExhaustiveOnSample,
    Randomized,
}

/// Result of a hyperbolicity estimate. `delta_hat` is the largest defect
/// seen, hence a lower bound for the hyperbolicity constant of the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub struct DeltaEstimate<P> {
    pub delta_hat: f64,
    pub quadruples_checked: u64,
    /// Ordered `(p, x, y, z)` attaining `delta_hat`.
    pub witness: [P; 4],
    pub mode: EstimateMode,
}

pub enum Region<'a, P> {
    /// A finite set of marked points; quadruples are drawn from it.
    Points(&'a [P]),
    /// The space's own sampling distribution.
    Sampler,
}

/// Estimates the hyperbolicity constant of a region.
///
/// A finite region small enough for `budget` is searched exhaustively (every
/// multiset of four points, every ordering). Otherwise `budget` quadruples are
/// drawn with replacement, in fixed chunks with one random stream each, and
/// the maximum is reduced in chunk order.
pub fn estimate_delta<S: GeodesicSpace>(
    space: &S,
    region: Region<'_, S::Point>,
    budget: u64,
    seed: u64,
) -> Result<DeltaEstimate<S::Point>> {
    if budget == 0 {
        return invalid("quadruple budget must be at least 1");
    }
    if let Region::Points(pts) = region {
        if pts.is_empty() {
            return invalid("empty region");
        }
        let n = pts.len() as u128;
        let multisets = n * (n + 1) * (n + 2) * (n + 3) / 24;
        if multisets <= budget as u128 {
            return Ok(exhaustive(space, pts));
        }
    }

    let chunks = budget.div_ceil(CHUNK);
    let partial: Vec<(f64, [S::Point; 4])> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream_id(DELTA_STREAM_TAG, c));
            let count = CHUNK.min(budget - c * CHUNK);
            let mut best: Option<(f64, [S::Point; 4])> = None;
            for _ in 0..count {
                let quad: [S::Point; 4] = std::array::from_fn(|_| match &region {
                    Region::Points(pts) => pts[rng.random_range(0..pts.len())].clone(),
                    Region::Sampler => space.random_point(&mut rng),
                });
                let (v, o) = quadruple_defect(space, [&quad[0], &quad[1], &quad[2], &quad[3]]);
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, o.map(|i| quad[i].clone())));
                }
            }
            best.expect("chunks are nonempty")
        })
        .collect();
    let (delta, witness) = partial
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("budget is positive");
    Ok(DeltaEstimate {
        delta_hat: delta.max(0.0),
        quadruples_checked: budget,
        witness,
        mode: EstimateMode::Randomized,
    })
}

fn exhaustive<S: GeodesicSpace>(space: &S, pts: &[S::Point]) -> DeltaEstimate<S::Point> {
    let n = pts.len();
    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    let mut checked = 0u64;
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                for l in k..n {
                    let idx = [i, j, k, l];
                    let (v, o) = quadruple_defect(space, [&pts[i], &pts[j], &pts[k], &pts[l]]);
                    checked += 1;
                    if v > best.0 {
                        best = (v, o.map(|m| idx[m]));
                    }
                }
            }
        }
    }
    DeltaEstimate {
        delta_hat: best.0.max(0.0),
        quadruples_checked: checked,
        witness: best.1.map(|m| pts[m].clone()),
        mode: EstimateMode::ExhaustiveOnSample,
    }
}

/// How the δ used in bound checks is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaPolicy {
    Fixed(f64),
    /// `delta_hat × safety` from a randomized estimate over the sampler.
    Estimate { budget: u64, safety: f64 },
}

pub const DEFAULT_SAFETY: f64 = 1.05;

impl DeltaPolicy {
    pub fn estimate(budget: u64) -> Self {
        DeltaPolicy::Estimate { budget, safety: DEFAULT_SAFETY }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaPolicy::Fixed(d) if d.is_finite() && d >= 0.0 => Ok(()),
            DeltaPolicy::Fixed(d) => invalid(format!("delta must be a finite value >= 0, got {d}")),
            DeltaPolicy::Estimate { budget, safety } => {
                if budget == 0 {
                    invalid("delta estimation budget must be at least 1")
                } else if !(safety.is_finite() && safety >= 1.0) {
                    invalid(format!("delta safety factor must be >= 1, got {safety}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The configured δ, plus the estimate it came from when estimated.
    pub fn resolve<S: GeodesicSpace>(
        &self,
        space: &S,
        seed: u64,
    ) -> Result<(f64, Option<DeltaEstimate<S::Point>>)> {
        self.validate()?;
        match *self {
            DeltaPolicy::Fixed(d) => Ok((d, None)),
            DeltaPolicy::Estimate { budget, safety } => {
                let est = estimate_delta(space, Region::Sampler, budget, seed)?;
                Ok((est.delta_hat * safety, Some(est)))
            }
        }
    }
}

/// A side of the triangle `x p q`, oriented from its first named vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    XP,
    XQ,
    PQ,
}

/// A leg of the comparison tripod, named after the vertex at its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    X,
    P,
    Q,
}

/// A point of the tripod: a leg and the distance from the branch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripodPosition {
    pub leg: Leg,
    pub radius: f64,
}

/// Comparison tripod of the triangle `x p q`.
///
/// Leg lengths are `(p|q)_x`, `(x|q)_p` and `(x|p)_q`; each side maps
/// isometrically onto the two legs at its ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripodCoordinates {
    pub leg_x: f64,
    pub leg_p: f64,
    pub leg_q: f64,
}

impl TripodCoordinates {
    pub fn leg_length(&self, leg: Leg) -> f64 {
        match leg {
            Leg::X => self.leg_x,
            Leg::P => self.leg_p,
            Leg::Q => self.leg_q,
        }
    }

    fn side_legs(side: Side) -> (Leg, Leg) {
        match side {
            Side::XP => (Leg::X, Leg::P),
            Side::XQ => (Leg::X, Leg::Q),
            Side::PQ => (Leg::P, Leg::Q),
        }
    }

    pub fn side_length(&self, side: Side) -> f64 {
        let (a, b) = Self::side_legs(side);
        self.leg_length(a) + self.leg_length(b)
    }

    /// Image of the point at arc length `s` along `side`.
    pub fn position(&self, side: Side, s: f64) -> TripodPosition {
        let (a, b) = Self::side_legs(side);
        let la = self.leg_length(a);
        if s <= la {
            TripodPosition { leg: a, radius: la - s }
        } else {
            TripodPosition { leg: b, radius: (s - la).min(self.leg_length(b)) }
        }
    }

    pub fn distance(&self, u: &TripodPosition, v: &TripodPosition) -> f64 {
        if u.leg == v.leg {
            (u.radius - v.radius).abs()
        } else {
            u.radius + v.radius
        }
    }
}

pub fn tripod_map<S: GeodesicSpace>(space: &S, x: &S::Point, p: &S::Point, q: &S::Point) -> TripodCoordinates {
    TripodCoordinates {
        leg_x: gromov_product(space, p, q, x).max(0.0),
        leg_p: gromov_product(space, x, q, p).max(0.0),
        leg_q: gromov_product(space, x, p, q).max(0.0),
    }
}

/// The point at arc length `s` along `side` of the triangle `x p q`.
pub fn side_point<S: GeodesicSpace>(
    space: &S,
    (x, p, q): (&S::Point, &S::Point, &S::Point),
    side: Side,
    s: f64,
) -> S::Point {
    let (a, b) = match side {
        Side::XP => (x, p),
        Side::XQ => (x, q),
        Side::PQ => (p, q),
    };
    let len = space.distance(a, b);
    let t = if len > 0.0 { (s / len).clamp(0.0, 1.0) } else { 0.0 };
    space.geodesic_unchecked(a, b, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{EuclideanPlane, MetricTree, PlanePoint, PoincareDisk, TreePoint};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gromov_product_cases() {
        let star = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let (x, y, z) = (TreePoint::Vertex(1), TreePoint::Vertex(2), TreePoint::Vertex(3));
        assert_eq!(gromov_product(&star, &y, &z, &x), 1.0);
        assert_eq!(gromov_product(&star, &y, &z, &x), star.distance(&x, &TreePoint::Vertex(0)));
        // base on the geodesic [y, z]
        assert_eq!(gromov_product(&star, &y, &z, &TreePoint::Vertex(0)), 0.0);
        assert_eq!(gromov_product(&star, &x, &x, &y), star.distance(&y, &x));
    }

    #[test]
    fn square_corner_defect() {
        let plane = EuclideanPlane::default();
        let c = [
            PlanePoint::new(0.0, 0.0),
            PlanePoint::new(1.0, 0.0),
            PlanePoint::new(1.0, 1.0),
            PlanePoint::new(0.0, 1.0),
        ];
        // Oracle: Gromov products from hand-written side and diagonal lengths.
        let s2 = 2f64.sqrt();
        let d = |i: usize, j: usize| -> f64 {
            if (i + j) % 2 == 0 { s2 } else { 1.0 }
        };
        let gp = |a: usize, b: usize, base: usize| 0.5 * (d(base, a) + d(base, b) - if a == b { 0.0 } else { d(a, b) });
        let oracle = gp(1, 2, 0).min(gp(2, 3, 0)) - gp(1, 3, 0);
        assert_abs_diff_eq!(oracle, s2 - 1.0, epsilon = 1e-15);
        let v = four_point_defect(&plane, &c[0], &c[1], &c[2], &c[3]);
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-14);
        // Maximum over the 24 orderings, against a direct loop.
        let mut brute = f64::NEG_INFINITY;
        for o in PERMUTATIONS {
            brute = brute.max(four_point_defect(&plane, &c[o[0]], &c[o[1]], &c[o[2]], &c[o[3]]));
        }
        let (best, _) = quadruple_defect(&plane, [&c[0], &c[1], &c[2], &c[3]]);
        assert_abs_diff_eq!(best, brute, epsilon = 1e-15);
        assert_abs_diff_eq!(best, s2 - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn defect_nonpositive_when_base_repeats() {
        let disk = PoincareDisk::default();
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let [x, y, z] = std::array::from_fn(|_| disk.random_point(&mut rng));
            assert!(four_point_defect(&disk, &x, &x, &y, &z) <= 1e-12);
        }
    }

    #[test]
    fn tree_exhaustive_estimate_is_zero() {
        let mut rng = stream_rng(11, 0);
        for n in [2, 5, 12] {
            let tree = MetricTree::random(n, 0.2, 3.0, &mut rng).unwrap();
            let pts: Vec<_> = (0..8).map(|_| tree.random_point(&mut rng)).collect();
            let est = estimate_delta(&tree, Region::Points(&pts), 1_000_000, 0).unwrap();
            assert_eq!(est.mode, EstimateMode::ExhaustiveOnSample);
            assert_eq!(est.quadruples_checked, 330);
            assert!(est.delta_hat <= 1e-12, "{}", est.delta_hat);
        }
    }

    #[test]
    fn small_regions() {
        let plane = EuclideanPlane::default();
        let p = PlanePoint::new(0.3, 0.3);
        let est = estimate_delta(&plane, Region::Points(&[p, p, p]), 100, 1).unwrap();
        assert_eq!(est.delta_hat, 0.0);
        assert!(estimate_delta(&plane, Region::Points(&[]), 100, 1).is_err());
        assert!(estimate_delta(&plane, Region::Sampler, 0, 1).is_err());
    }

    #[test]
    fn randomized_estimate_is_deterministic() {
        let disk = PoincareDisk::default();
        let a = estimate_delta(&disk, Region::Sampler, 20_000, 5).unwrap();
        let b = estimate_delta(&disk, Region::Sampler, 20_000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode, EstimateMode::Randomized);
        let [p, x, y, z] = &a.witness;
        assert_abs_diff_eq!(four_point_defect(&disk, p, x, y, z), a.delta_hat, epsilon = 1e-15);
    }

    #[test]
    fn plane_estimate_scales_linearly() {
        let small = EuclideanPlane::new(3.0).unwrap();
        let big = EuclideanPlane::new(6.0).unwrap();
        let a = estimate_delta(&small, Region::Sampler, 50_000, 9).unwrap();
        let b = estimate_delta(&big, Region::Sampler, 50_000, 9).unwrap();
        assert!(a.delta_hat > 0.0);
        assert_abs_diff_eq!(b.delta_hat, 2.0 * a.delta_hat, epsilon = 1e-9);
    }

    #[test]
    fn tripod_legs() {
        let tree = MetricTree::path(&[1.0, 2.0]).unwrap();
        let (x, q, p) = (TreePoint::Vertex(0), TreePoint::Vertex(1), TreePoint::Vertex(2));
        let t = tripod_map(&tree, &x, &p, &q);
        assert_eq!(t.leg_q, 0.0);
        assert_eq!(t.leg_x + t.leg_p, tree.distance(&x, &p));
    }

    #[test]
    fn delta_policy_resolution() {
        let tree = MetricTree::star(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(DeltaPolicy::Fixed(0.25).resolve(&tree, 0).unwrap().0, 0.25);
        assert!(DeltaPolicy::Fixed(-1.0).resolve(&tree, 0).is_err());
        let (d, est) = DeltaPolicy::estimate(10_000).resolve(&tree, 0).unwrap();
        assert!(d <= 1e-12);
        assert!(est.is_some());
    }
}
