use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spaces::GeodesicSpace;

/// Weight normalisation tolerance accepted at construction.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// A finitely supported probability measure.
///
/// Weights are positive and renormalised to sum to one; repeated support
/// points are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub struct DiscreteMeasure<P> {
    support: Vec<P>,
    weights: Vec<f64>,
}

impl<P: Clone + PartialEq> DiscreteMeasure<P> {
    pub fn new(support: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return invalid("a measure needs at least one support point");
        }
        if support.len() != weights.len() {
            return invalid(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return invalid(format!("weights must be positive, found {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        Ok(Self::merged(support, weights))
    }

    /// Builds a measure from positive masses of any total.
    pub fn from_masses(support: Vec<P>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total.is_finite() && total > 0.0) || masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return invalid("masses must be positive and finite");
        }
        if support.len() != masses.len() || support.is_empty() {
            return invalid("support and masses must be nonempty and of equal length");
        }
        Ok(Self::merged(support, masses))
    }

    pub fn dirac(p: P) -> Self {
        Self { support: vec![p], weights: vec![1.0] }
    }

    /// Uniform measure on a list of points, counted with multiplicity.
    pub fn uniform(points: Vec<P>) -> Result<Self> {
        let n = points.len();
        Self::from_masses(points, vec![1.0; n])
    }

    /// Empirical measure from counts over `support`; zero counts are dropped.
    pub fn from_counts(support: &[P], counts: &[u64]) -> Result<Self> {
        let (pts, masses): (Vec<P>, Vec<f64>) = support
            .iter()
            .zip(counts)
            .filter(|(_, c)| **c > 0)
            .map(|(p, c)| (p.clone(), *c as f64))
            .unzip();
        Self::from_masses(pts, masses)
    }

    fn merged(support: Vec<P>, masses: Vec<f64>) -> Self {
        let mut pts: Vec<P> = Vec::with_capacity(support.len());
        let mut acc: Vec<f64> = Vec::with_capacity(support.len());
        for (p, m) in support.into_iter().zip(masses) {
            match pts.iter().position(|q| *q == p) {
                Some(i) => acc[i] += m,
                None => {
                    pts.push(p);
                    acc.push(m);
                }
            }
        }
        let total: f64 = acc.iter().sum();
        let weights = acc.into_iter().map(|m| m / total).collect();
        Self { support: pts, weights }
    }

    pub fn support(&self) -> &[P] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }
}

/// Checks every support point against the space.
pub fn validate_measure<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>) -> Result<()> {
    mu.support().iter().try_for_each(|p| space.validate(p))
}

/// `(Σ w_i d^p(x, z_i))^{1/p}`, i.e. `W_p(δ_x, μ)`.
pub fn moment<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, x: &S::Point, order: u32) -> Result<f64> {
    match order {
        1 => Ok(mu.iter().map(|(z, w)| w * space.distance(x, z)).sum()),
        2 => Ok(w2_variance(space, mu, x).sqrt()),
        _ => invalid(format!("moment order must be 1 or 2, got {order}")),
    }
}

/// `W_2^2(δ_x, μ) = Σ w_i d^2(x, z_i)`.
pub fn w2_variance<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, x: &S::Point) -> f64 {
    mu.iter()
        .map(|(z, w)| {
            let d = space.distance(x, z);
            w * d * d
        })
        .sum()
}
