//! Concrete geodesic metric spaces.
//!
//! Three spaces are provided, all uniquely geodesic:
//!
//! * [`MetricTree`]: a finite weighted tree, 0-hyperbolic and CAT(0);
//! * [`PoincareDisk`]: the hyperbolic plane in the unit-disk model;
//! * [`EuclideanPlane`]: the flat plane, used as a non-hyperbolic control.
//!
//! Algorithms are generic over [`GeodesicSpace`]. Points cross file and JSON
//! boundaries as the tagged [`PointRef`].

pub(crate) mod disk;
pub mod io;
mod plane;
mod tree;

pub use disk::{DiskPoint, PoincareDisk};
pub use plane::{EuclideanPlane, PlanePoint};
pub use tree::{MetricTree, TreeEdge, TreePoint};

use std::fmt;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which family a space (or a point reference) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Tree,
    Disk,
    Plane,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Tree => "tree",
            SpaceKind::Disk => "disk",
            SpaceKind::Plane => "plane",
        })
    }
}

/// A space-tagged point, the exchange format for files and JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointRef {
    Vertex { id: String },
    Edge { edge: usize, offset: f64 },
    Disk { x: f64, y: f64 },
    Plane { x: f64, y: f64 },
}

impl PointRef {
    pub fn kind(&self) -> SpaceKind {
        match self {
            PointRef::Vertex { .. } | PointRef::Edge { .. } => SpaceKind::Tree,
            PointRef::Disk { .. } => SpaceKind::Disk,
            PointRef::Plane { .. } => SpaceKind::Plane,
        }
    }
}

/// A uniquely geodesic metric space with exact distances.
///
/// Implementations are immutable and shareable across threads.
pub trait GeodesicSpace: Send + Sync {
    type Point: Clone + fmt::Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;

    fn kind(&self) -> SpaceKind;

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> f64;

    /// Point at parameter `t` on the geodesic from `p` to `q`; `t` must
    /// already lie in `[0, 1]`.
    fn geodesic_unchecked(&self, p: &Self::Point, q: &Self::Point, t: f64) -> Self::Point;

    /// Point `w` on the geodesic from `p` to `q` with `d(p,w) = t d(p,q)`.
    fn geodesic_point(&self, p: &Self::Point, q: &Self::Point, t: f64) -> Result<Self::Point> {
        if !(0.0..=1.0).contains(&t) {
            return invalid(format!("geodesic parameter t = {t} outside [0, 1]"));
        }
        Ok(self.geodesic_unchecked(p, q, t))
    }

    /// Checks that the coordinates of `p` are valid for this space.
    fn validate(&self, p: &Self::Point) -> Result<()>;

    /// Draws a point from the space's documented sampling distribution.
    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    fn to_ref(&self, p: &Self::Point) -> PointRef;

    fn from_ref(&self, r: &PointRef) -> Result<Self::Point>;

    /// Maximum pairwise distance of a finite set (0 when empty).
    fn set_diameter(&self, points: &[Self::Point]) -> f64 {
        pruned_diameter(self, points)
    }
}

/// Maximum pairwise distance of a nonempty finite set.
pub fn diameter_of_finite_set<S: GeodesicSpace>(space: &S, points: &[S::Point]) -> Result<f64> {
    if points.is_empty() {
        return invalid("diameter of an empty point set");
    }
    Ok(diameter(space, points))
}

pub(crate) fn diameter<S: GeodesicSpace>(space: &S, points: &[S::Point]) -> f64 {
    space.set_diameter(points)
}

/// Exact all-pairs maximum, skipping pairs whose distances to the first
/// point already rule them out by the triangle inequality.
pub(crate) fn pruned_diameter<S: GeodesicSpace + ?Sized>(space: &S, points: &[S::Point]) -> f64 {
    let Some(anchor) = points.first() else {
        return 0.0;
    };
    let mut radius: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (space.distance(anchor, p), i))
        .collect();
    radius.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = radius[0].0;
    for (a, &(ra, i)) in radius.iter().enumerate() {
        if 2.0 * ra <= best {
            break;
        }
        for &(rb, j) in &radius[a + 1..] {
            if ra + rb <= best {
                break;
            }
            best = best.max(space.distance(&points[i], &points[j]));
        }
    }
    best
}

/// Any of the built-in spaces, for callers that choose the space at run time.
#[derive(Debug, Clone)]
pub enum AnySpace {
    Tree(MetricTree),
    Disk(PoincareDisk),
    Plane(EuclideanPlane),
}

impl AnySpace {
    pub fn kind(&self) -> SpaceKind {
        match self {
            AnySpace::Tree(_) => SpaceKind::Tree,
            AnySpace::Disk(_) => SpaceKind::Disk,
            AnySpace::Plane(_) => SpaceKind::Plane,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diameter_cases() {
        let plane = EuclideanPlane::default();
        assert!(diameter_of_finite_set(&plane, &[]).is_err());
        let a = PlanePoint::new(1.0, 2.0);
        assert_eq!(diameter_of_finite_set(&plane, &[a]).unwrap(), 0.0);
        let b = PlanePoint::new(4.0, 6.0);
        assert_eq!(diameter_of_finite_set(&plane, &[a, b]).unwrap(), 5.0);
    }

    fn brute_diameter<S: GeodesicSpace>(space: &S, pts: &[S::Point]) -> f64 {
        let mut best = 0.0f64;
        for p in pts {
            for q in pts {
                best = best.max(space.distance(p, q));
            }
        }
        best
    }

    #[test]
    fn fast_diameters_match_brute_force() {
        let mut rng = crate::rng::stream_rng(11, 0);
        for n in [1usize, 2, 5, 40] {
            let tree = MetricTree::random(12, 0.1, 2.0, &mut rng).unwrap();
            let pts: Vec<_> = (0..n).map(|_| tree.random_point(&mut rng)).collect();
            assert!((tree.set_diameter(&pts) - brute_diameter(&tree, &pts)).abs() < 1e-12);
            let disk = PoincareDisk::default();
            let pts: Vec<_> = (0..n).map(|_| disk.random_point(&mut rng)).collect();
            assert_eq!(disk.set_diameter(&pts), brute_diameter(&disk, &pts));
        }
    }

    #[test]
    fn star_diameter_matches_brute_force() {
        let tree = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let leaves: Vec<_> = (1..=3).map(TreePoint::Vertex).collect();
        let mut brute = 0.0f64;
        for p in &leaves {
            for q in &leaves {
                brute = brute.max(tree.distance(p, q));
            }
        }
        assert_eq!(brute, 5.0);
        assert_eq!(diameter_of_finite_set(&tree, &leaves).unwrap(), brute);
    }

    #[test]
    fn mismatched_tags_rejected() {
        let disk = PoincareDisk::default();
        let r = PointRef::Plane { x: 0.1, y: 0.1 };
        assert!(disk.from_ref(&r).is_err());
        let tree = MetricTree::path(&[1.0]).unwrap();
        assert!(tree.from_ref(&PointRef::Disk { x: 0.0, y: 0.0 }).is_err());
        assert!(EuclideanPlane::default().from_ref(&PointRef::Edge { edge: 0, offset: 0.5 }).is_err());
    }
}
