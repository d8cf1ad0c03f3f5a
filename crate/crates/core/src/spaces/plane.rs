use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeodesicSpace, PointRef, SpaceKind};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// The Euclidean plane. Not Gromov hyperbolic: bounded regions are
/// hyperbolic only with a constant growing linearly in their size.
///
/// `sample_radius` is the radius of the origin-centred disc sampled uniformly
/// by [`GeodesicSpace::random_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EuclideanPlane {
    pub sample_radius: f64,
}

impl Default for EuclideanPlane {
    fn default() -> Self {
        Self { sample_radius: 3.0 }
    }
}

impl EuclideanPlane {
    pub fn new(sample_radius: f64) -> Result<Self> {
        if !(sample_radius.is_finite() && sample_radius > 0.0) {
            return invalid(format!("plane sample radius must be positive, got {sample_radius}"));
        }
        Ok(Self { sample_radius })
    }
}

impl GeodesicSpace for EuclideanPlane {
    type Point = PlanePoint;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Plane
    }

    fn distance(&self, p: &PlanePoint, q: &PlanePoint) -> f64 {
        (p.x - q.x).hypot(p.y - q.y)
    }

    fn geodesic_unchecked(&self, p: &PlanePoint, q: &PlanePoint, t: f64) -> PlanePoint {
        if t <= 0.0 {
            return *p;
        }
        if t >= 1.0 {
            return *q;
        }
        PlanePoint::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
    }

    fn validate(&self, p: &PlanePoint) -> Result<()> {
        if p.x.is_finite() && p.y.is_finite() {
            Ok(())
        } else {
            invalid("plane point has non-finite coordinates")
        }
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> PlanePoint {
        let r = self.sample_radius * rng.random::<f64>().sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        PlanePoint::new(r * theta.cos(), r * theta.sin())
    }

    fn to_ref(&self, p: &PlanePoint) -> PointRef {
        PointRef::Plane { x: p.x, y: p.y }
    }

    fn from_ref(&self, r: &PointRef) -> Result<PlanePoint> {
        match *r {
            PointRef::Plane { x, y } => {
                let p = PlanePoint::new(x, y);
                self.validate(&p)?;
                Ok(p)
            }
            ref other => invalid(format!("{} point given for the plane", other.kind())),
        }
    }
}
