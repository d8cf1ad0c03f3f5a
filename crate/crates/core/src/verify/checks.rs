use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::InequalityId;
use crate::barycenter::{base_value, sample_barycentric_point, Barycentric, SolverOptions};
use crate::error::Result;
use crate::schemes::{dist_to_a, product_sq, proximal_sqdist, theta, AugmentedPoint};
use crate::spaces::GeodesicSpace;
use crate::transport::{moment, wasserstein, DiscreteMeasure, Order};

/// One randomized inequality: how to draw an instance and how to measure
/// `lhs - rhs` on it. `evaluate` is a pure function of the instance, which
/// is what makes witnesses replayable.
pub(crate) trait Check<S: Barycentric> {
    const ID: InequalityId;
    type Instance: Serialize + DeserializeOwned + Send;

    /// `None` when the draw does not meet the inequality's hypotheses.
    fn sample<R: Rng>(space: &S, delta: f64, rng: &mut R) -> Result<Option<Self::Instance>>;

    fn evaluate(space: &S, inst: &Self::Instance, delta: f64) -> Result<f64>;
}

fn sq(v: f64) -> f64 {
    v * v
}

/// Step sizes spread over several orders of magnitude.
fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct Triangle<P> {
    x: P,
    y: P,
    z: P,
    t: f64,
}

pub(crate) struct Cat0Midpoint;
pub(crate) struct Cat0General;

impl<S: Barycentric> Check<S> for Cat0Midpoint {
    const ID: InequalityId = InequalityId::Cat0Midpoint;
    type Instance = Triangle<S::Point>;

    fn sample<R: Rng>(space: &S, _: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        let [x, y, z] = std::array::from_fn(|_| space.random_point(rng));
        Ok(Some(Triangle { x, y, z, t: 0.5 }))
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let w = space.geodesic_point(&i.x, &i.y, 0.5)?;
        let (zx, zy, xy) = (space.distance(&i.z, &i.x), space.distance(&i.z, &i.y), space.distance(&i.x, &i.y));
        let lhs = sq(space.distance(&i.z, &w));
        let rhs = 0.5 * sq(zx) + 0.5 * sq(zy) - 0.25 * sq(xy) + 2.0 * delta * (zx + zy) + 4.0 * sq(delta);
        Ok(lhs - rhs)
    }
}

impl<S: Barycentric> Check<S> for Cat0General {
    const ID: InequalityId = InequalityId::Cat0General;
    type Instance = Triangle<S::Point>;

    fn sample<R: Rng>(space: &S, _: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        let [x, y, z] = std::array::from_fn(|_| space.random_point(rng));
        Ok(Some(Triangle { x, y, z, t: rng.random() }))
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let t = i.t;
        let w = space.geodesic_point(&i.x, &i.y, t)?;
        let (zx, zy, xy) = (space.distance(&i.z, &i.x), space.distance(&i.z, &i.y), space.distance(&i.x, &i.y));
        let lhs = sq(space.distance(&i.z, &w));
        let rhs = (1.0 - t) * sq(zx) + t * sq(zy) - (1.0 - t) * t * sq(xy) + 4.0 * delta * zx.max(zy) + 4.0 * sq(delta);
        Ok(lhs - rhs)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct Quad<P> {
    x: P,
    y: P,
    p: P,
    q: P,
    t: f64,
}

pub(crate) struct Busemann;

impl<S: Barycentric> Check<S> for Busemann {
    const ID: InequalityId = InequalityId::Busemann;
    type Instance = Quad<S::Point>;

    fn sample<R: Rng>(space: &S, _: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        let [x, y, p, q] = std::array::from_fn(|_| space.random_point(rng));
        Ok(Some(Quad { x, y, p, q, t: rng.random() }))
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let g = space.geodesic_point(&i.x, &i.p, i.t)?;
        let h = space.geodesic_point(&i.y, &i.q, i.t)?;
        let lhs = space.distance(&g, &h);
        let rhs = (1.0 - i.t) * space.distance(&i.x, &i.y) + i.t * space.distance(&i.p, &i.q) + 8.0 * delta;
        Ok(lhs - rhs)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct ProxInstance<P> {
    w: P,
    x: P,
    z: P,
    tau: f64,
}

pub(crate) struct KeyEstimate;

impl<S: Barycentric> Check<S> for KeyEstimate {
    const ID: InequalityId = InequalityId::KeyEstimate;
    type Instance = ProxInstance<S::Point>;

    fn sample<R: Rng>(space: &S, _: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        let [w, x, z] = std::array::from_fn(|_| space.random_point(rng));
        Ok(Some(ProxInstance { w, x, z, tau: log_uniform(rng, 0.01, 10.0) }))
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let y = proximal_sqdist(space, &i.z, &i.x, i.tau)?;
        let (zw, wy, zy) = (space.distance(&i.z, &i.w), space.distance(&i.w, &y), space.distance(&i.z, &y));
        let big_theta = theta(zw, wy, zy, i.tau, delta);
        let lhs = sq(wy);
        let rhs = sq(space.distance(&i.w, &i.x)) - 2.0 * i.tau * (sq(zy) - sq(zw)) + big_theta * i.tau * delta;
        Ok(lhs - rhs)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct ProjectionInstance<P> {
    x: P,
    y: P,
    r: f64,
    p: P,
    q: P,
}

pub(crate) struct ProjectionLemma;

/// Draws per trial before giving up on meeting `d(x,y) - r ≥ 8δ`.
const HYPOTHESIS_ATTEMPTS: usize = 1000;

impl<S: Barycentric> Check<S> for ProjectionLemma {
    const ID: InequalityId = InequalityId::ProjectionLemma;
    type Instance = ProjectionInstance<S::Point>;

    fn sample<R: Rng>(space: &S, delta: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        for _ in 0..HYPOTHESIS_ATTEMPTS {
            let [x, y] = std::array::from_fn(|_| space.random_point(rng));
            let room = space.distance(&x, &y) - 8.0 * delta;
            if room > 0.0 {
                let r = rng.random::<f64>() * room;
                let [p, q] = std::array::from_fn(|_| space.random_point(rng));
                return Ok(Some(ProjectionInstance { x, y, r, p, q }));
            }
        }
        Ok(None)
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let a = AugmentedPoint::new(i.x.clone(), i.y.clone(), i.r)?;
        let b = AugmentedPoint::new(i.p.clone(), i.q.clone(), space.distance(&i.p, &i.q))?;
        let (dist, proj) = dist_to_a(space, &a);
        let d1 = space.set_diameter(&[i.x.clone(), i.y.clone(), i.p.clone(), i.q.clone()]);
        let lhs = product_sq(space, &proj, &b);
        let rhs = product_sq(space, &a, &b) - sq(dist) + 18.0 * d1 * (d1 + delta).sqrt() * delta.sqrt();
        Ok(lhs - rhs)
    }
}

/// A point of a barycentric set together with the ε it is certified for.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct Member<P> {
    point: P,
    epsilon: f64,
}

fn random_measure<S: GeodesicSpace, R: Rng>(space: &S, rng: &mut R) -> Result<DiscreteMeasure<S::Point>> {
    let n = rng.random_range(1..=8);
    let pts = (0..n).map(|_| space.random_point(rng)).collect();
    let masses = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::from_masses(pts, masses)
}

fn random_epsilon<R: Rng>(rng: &mut R) -> f64 {
    if rng.random_range(0..3) == 0 {
        0.0
    } else {
        rng.random_range(0.0..2.0)
    }
}

/// Rejection proposals per barycentric-set draw.
const MEMBER_ATTEMPTS: usize = 64;

fn random_member<S: Barycentric, R: Rng>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    rng: &mut R,
) -> Result<Member<S::Point>> {
    let bary = space.barycenter(mu, &SolverOptions::default())?;
    let eps = random_epsilon(rng);
    let point = sample_barycentric_point(space, mu, &bary, eps, MEMBER_ATTEMPTS, rng);
    let certified = base_value(space, mu, &point) - bary.v_inf_estimate;
    Ok(Member { point, epsilon: eps.max(certified) })
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct ContractionInstance<P> {
    mu: DiscreteMeasure<P>,
    nu: DiscreteMeasure<P>,
    x: Member<P>,
    y: Member<P>,
}

pub(crate) struct WassersteinContraction;

impl<S: Barycentric> Check<S> for WassersteinContraction {
    const ID: InequalityId = InequalityId::WassersteinContraction;
    type Instance = ContractionInstance<S::Point>;

    fn sample<R: Rng>(space: &S, _: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        let mu = random_measure(space, rng)?;
        let nu = random_measure(space, rng)?;
        let x = random_member(space, &mu, rng)?;
        let y = random_member(space, &nu, rng)?;
        Ok(Some(ContractionInstance { mu, nu, x, y }))
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let (w1, _) = wasserstein(space, Order::One, &i.mu, &i.nu)?;
        let mut pts = vec![i.x.point.clone(), i.y.point.clone()];
        pts.extend(i.mu.support().iter().cloned());
        pts.extend(i.nu.support().iter().cloned());
        let d2 = space.set_diameter(&pts);
        let eps = i.x.epsilon + i.y.epsilon;
        let excess = (8.0 * delta).max((54.0 * d2 * (d2 + delta).sqrt() * delta.sqrt() + 3.0 * eps).sqrt());
        Ok(space.distance(&i.x.point, &i.y.point) - (w1 + excess))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub(crate) struct VarianceInstance<P> {
    mu: DiscreteMeasure<P>,
    x: Member<P>,
    y: Member<P>,
}

pub(crate) struct VarianceInequality;

impl<S: Barycentric> Check<S> for VarianceInequality {
    const ID: InequalityId = InequalityId::VarianceInequality;
    type Instance = VarianceInstance<S::Point>;

    fn sample<R: Rng>(space: &S, _: f64, rng: &mut R) -> Result<Option<Self::Instance>> {
        let mu = random_measure(space, rng)?;
        let x = random_member(space, &mu, rng)?;
        let y = random_member(space, &mu, rng)?;
        Ok(Some(VarianceInstance { mu, x, y }))
    }

    fn evaluate(space: &S, i: &Self::Instance, delta: f64) -> Result<f64> {
        let w1x = moment(space, &i.mu, &i.x.point, 1)?;
        let w1y = moment(space, &i.mu, &i.y.point, 1)?;
        let bound = crate::barycenter::barycentric_diameter_bound(w1x, w1y, delta, i.x.epsilon, i.y.epsilon);
        Ok(space.distance(&i.x.point, &i.y.point) - bound)
    }
}
