use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeodesicSpace, PointRef, SpaceKind};
use crate::error::{invalid, Result};

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub x: f64,
    pub y: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self { x: z.re, y: z.im }
    }

    /// The point at hyperbolic distance `rho` from the origin in direction `theta`.
    pub fn polar(rho: f64, theta: f64) -> Self {
        Self::from_complex(Complex64::from_polar((rho / 2.0).tanh(), theta))
    }
}

/// Poincaré disk model of the hyperbolic plane (curvature −1).
///
/// `sample_radius` is the hyperbolic radius of the origin-centred ball used
/// by [`GeodesicSpace::random_point`], which samples uniformly with respect
/// to hyperbolic area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareDisk {
    pub sample_radius: f64,
}

impl Default for PoincareDisk {
    fn default() -> Self {
        Self { sample_radius: 3.0 }
    }
}

/// Möbius isometry sending `a` to the origin.
pub(crate) fn to_origin(a: Complex64, w: Complex64) -> Complex64 {
    (w - a) / (Complex64::new(1.0, 0.0) - a.conj() * w)
}

/// Inverse of [`to_origin`].
pub(crate) fn from_origin(a: Complex64, w: Complex64) -> Complex64 {
    (w + a) / (Complex64::new(1.0, 0.0) + a.conj() * w)
}

impl PoincareDisk {
    pub fn new(sample_radius: f64) -> Result<Self> {
        if !(sample_radius.is_finite() && sample_radius > 0.0) {
            return invalid(format!("disk sample radius must be positive, got {sample_radius}"));
        }
        Ok(Self { sample_radius })
    }

    /// Closed-form metric `arccosh(1 + 2|z-w|^2 / ((1-|z|^2)(1-|w|^2)))`,
    /// with the argument clamped to at least 1.
    pub fn distance_arccosh(&self, p: &DiskPoint, q: &DiskPoint) -> f64 {
        let (z, w) = (p.as_complex(), q.as_complex());
        let num = 2.0 * (z - w).norm_sqr();
        let den = (1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr());
        (1.0 + num / den).max(1.0).acosh()
    }
}

impl GeodesicSpace for PoincareDisk {
    type Point = DiskPoint;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Disk
    }

    /// Evaluated as `2 artanh(|z - w| / |1 - conj(z) w|)`, which agrees with
    /// the arccosh form but keeps full relative precision for nearby points.
    fn distance(&self, p: &DiskPoint, q: &DiskPoint) -> f64 {
        if p == q {
            return 0.0;
        }
        let (z, w) = (p.as_complex(), q.as_complex());
        let ratio = (z - w).norm() / (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
        2.0 * ratio.min(1.0 - f64::EPSILON).atanh()
    }

    fn geodesic_unchecked(&self, p: &DiskPoint, q: &DiskPoint, t: f64) -> DiskPoint {
        if t <= 0.0 || p == q {
            return *p;
        }
        if t >= 1.0 {
            return *q;
        }
        let a = p.as_complex();
        let image = to_origin(a, q.as_complex());
        let r = image.norm();
        let scaled = image * ((t * r.atanh()).tanh() / r);
        DiskPoint::from_complex(from_origin(a, scaled))
    }

    fn validate(&self, p: &DiskPoint) -> Result<()> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return invalid("disk point has non-finite coordinates");
        }
        if p.x * p.x + p.y * p.y >= 1.0 {
            return invalid(format!("disk point ({}, {}) not inside the unit disk", p.x, p.y));
        }
        Ok(())
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DiskPoint {
        // Hyperbolic area of a ball of radius rho is 2 pi (cosh rho - 1).
        let u: f64 = rng.random();
        let rho = (1.0 + u * (self.sample_radius.cosh() - 1.0)).acosh();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        DiskPoint::polar(rho, theta)
    }

    fn to_ref(&self, p: &DiskPoint) -> PointRef {
        PointRef::Disk { x: p.x, y: p.y }
    }

    fn from_ref(&self, r: &PointRef) -> Result<DiskPoint> {
        match *r {
            PointRef::Disk { x, y } => {
                let p = DiskPoint::new(x, y);
                self.validate(&p)?;
                Ok(p)
            }
            ref other => invalid(format!("{} point given for the disk", other.kind())),
        }
    }
}
