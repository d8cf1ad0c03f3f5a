//! Discrete probability measures and exact Wasserstein distances.

mod measure;
mod simplex;

pub use measure::{moment, validate_measure, w2_variance, DiscreteMeasure, WEIGHT_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spaces::io::{content_lines, format_point_ref, parse_point_ref};
use crate::spaces::GeodesicSpace;

/// Order of a Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    One,
    Two,
}

impl Order {
    pub fn exponent(self) -> u32 {
        match self {
            Order::One => 1,
            Order::Two => 2,
        }
    }
}

impl TryFrom<u32> for Order {
    type Error = Error;

    fn try_from(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            _ => invalid(format!("Wasserstein order must be 1 or 2, got {p}")),
        }
    }
}

/// A transport plan between the supports of two measures, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub rows: usize,
    pub cols: usize,
    pub plan: Vec<f64>,
}

impl Coupling {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }
}

/// Exact `W_p(μ, ν)` and an optimal coupling.
pub fn wasserstein<S: GeodesicSpace>(
    space: &S,
    order: Order,
    mu: &DiscreteMeasure<S::Point>,
    nu: &DiscreteMeasure<S::Point>,
) -> Result<(f64, Coupling)> {
    for (name, m) in [("first", mu), ("second", nu)] {
        let total: f64 = m.weights().iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return invalid(format!("{name} measure has total mass {total}"));
        }
    }
    let (rows, cols) = (mu.len(), nu.len());
    let mut cost = Vec::with_capacity(rows * cols);
    for z in mu.support() {
        for w in nu.support() {
            let d = space.distance(z, w);
            cost.push(match order {
                Order::One => d,
                Order::Two => d * d,
            });
        }
    }
    let plan = simplex::solve(mu.weights(), nu.weights(), &cost)?;
    let total: f64 = plan.iter().zip(&cost).map(|(x, c)| x * c).sum::<f64>().max(0.0);
    let value = match order {
        Order::One => total,
        Order::Two => total.sqrt(),
    };
    Ok((value, Coupling { rows, cols, plan }))
}

/// Reads a measure file: one `<weight> <point>` per line. A weight may be
/// written as a fraction `a/b`.
pub fn parse_measure<S: GeodesicSpace>(space: &S, text: &str) -> Result<DiscreteMeasure<S::Point>> {
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for (line, tokens) in content_lines(text) {
        let err = |message: String| Error::Parse { line, message };
        let w = parse_weight(tokens[0]).ok_or_else(|| err(format!("invalid weight {:?}", tokens[0])))?;
        let r = parse_point_ref(&tokens[1..], space.kind()).map_err(err)?;
        let p = space.from_ref(&r).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        support.push(p);
        weights.push(w);
    }
    DiscreteMeasure::new(support, weights)
}

fn parse_weight(tok: &str) -> Option<f64> {
    let v = match tok.split_once('/') {
        Some((a, b)) => a.parse::<f64>().ok()? / b.parse::<f64>().ok()?,
        None => tok.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

pub fn format_measure<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>) -> String {
    mu.iter()
        .map(|(p, w)| format!("{w:?} {}\n", format_point_ref(&space.to_ref(p))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{MetricTree, PoincareDisk, TreePoint};

    fn line(n: usize) -> MetricTree {
        MetricTree::path(&vec![1.0; n]).unwrap()
    }

    #[test]
    fn moments() {
        let t = line(4);
        let x = TreePoint::Vertex(1);
        let dirac = DiscreteMeasure::dirac(TreePoint::Vertex(3));
        assert_eq!(moment(&t, &dirac, &x, 1).unwrap(), 2.0);
        assert_eq!(moment(&t, &DiscreteMeasure::dirac(x), &x, 2).unwrap(), 0.0);
        // distances 1 and 3 from x
        let mu = DiscreteMeasure::uniform(vec![TreePoint::Vertex(0), TreePoint::Vertex(4)]).unwrap();
        assert!((moment(&t, &mu, &x, 2).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(moment(&t, &mu, &x, 3).is_err());
    }

    #[test]
    fn variance_cases() {
        let t = line(2);
        let mid = TreePoint::Vertex(1);
        assert_eq!(w2_variance(&t, &DiscreteMeasure::dirac(mid), &mid), 0.0);
        let ends = DiscreteMeasure::uniform(vec![TreePoint::Vertex(0), TreePoint::Vertex(2)]).unwrap();
        assert_eq!(w2_variance(&t, &ends, &mid), 1.0);
    }

    #[test]
    fn monotone_coupling_on_a_path() {
        let t = line(3);
        let mu = DiscreteMeasure::uniform(vec![TreePoint::Vertex(0), TreePoint::Vertex(1)]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![TreePoint::Vertex(0), TreePoint::Vertex(3)]).unwrap();
        // Oracle: the two permutation couplings cost (0+2)/2 = 1 and (3+1)/2 = 2.
        let (w1, c) = wasserstein(&t, Order::One, &mu, &nu).unwrap();
        assert!((w1 - 1.0).abs() < 1e-15);
        assert!((c.get(0, 0) - 0.5).abs() < 1e-15 && (c.get(1, 1) - 0.5).abs() < 1e-15);
        let (w0, _) = wasserstein(&t, Order::Two, &mu, &mu).unwrap();
        assert_eq!(w0, 0.0);
        let (d, _) = wasserstein(&t, Order::One, &DiscreteMeasure::dirac(TreePoint::Vertex(0)), &DiscreteMeasure::dirac(TreePoint::Vertex(2))).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn identity_coupling_for_equal_measures() {
        let t = line(5);
        let mu = DiscreteMeasure::new(
            vec![TreePoint::Vertex(0), TreePoint::Vertex(2), TreePoint::Vertex(5)],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let (w, c) = wasserstein(&t, Order::One, &mu, &mu).unwrap();
        assert_eq!(w, 0.0);
        for i in 0..3 {
            assert!((c.get(i, i) - mu.weights()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn construction_rules() {
        let p = TreePoint::Vertex(0);
        let q = TreePoint::Vertex(1);
        assert!(DiscreteMeasure::new(vec![p, q], vec![0.5, 0.4]).is_err());
        assert!(DiscreteMeasure::new(vec![p, q], vec![1.0, 0.0]).is_err());
        assert!(DiscreteMeasure::<TreePoint>::new(vec![], vec![]).is_err());
        let merged = DiscreteMeasure::new(vec![p, q, p], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged.weights(), &[0.5, 0.5]);
        assert!(Order::try_from(3).is_err());
    }

    #[test]
    fn measure_file_round_trip() {
        let disk = PoincareDisk::default();
        let mu = parse_measure(&disk, "# mu\n1/4 0.1 0.2\n0.75 -0.3 0.0\n").unwrap();
        assert_eq!(mu.len(), 2);
        let again = parse_measure(&disk, &format_measure(&disk, &mu)).unwrap();
        assert_eq!(again, mu);
        assert!(matches!(parse_measure(&disk, "0.5 0.1 0.2\nx 0 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_measure(&disk, "0.5 0.1 0.2\n").is_err());
    }
}
