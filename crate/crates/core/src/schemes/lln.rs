use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{proximal_sqdist, steps_for, theta_omega, SchemeConfig, TrajectoryRecord, SLACK};
use crate::barycenter::{Barycentric, BarycenterResult, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;
use crate::spaces::GeodesicSpace;
use crate::transport::{validate_measure, w2_variance, wasserstein, DiscreteMeasure, Order};

/// Monte Carlo summary of the stochastic proximal scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnSummary {
    pub replications: usize,
    pub steps: usize,
    /// Mean over replications of `d²(p, S_k)` for `k = 0..=steps`.
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Mean over replications of `Σ w_i d²(z_i, S_k)`.
    pub objective_means: Vec<f64>,
    /// Minimum of `estimates[k]` over `k < steps`.
    pub min_estimate: f64,
    pub argmin_k: usize,
    pub se_at_min: f64,
    pub k0_bound: f64,
    pub bound_rhs: f64,
    pub d_omega: f64,
    pub theta_omega: f64,
    pub delta: f64,
    pub bound_holds: bool,
    /// Largest `mean - (rhs + 3 SE)` of the one-step recursion in expectation.
    pub recursion_max_violation: f64,
    pub recursion_holds: bool,
    pub violation: bool,
}

fn mean_se(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Stochastic proximal iteration `S_{k+1} = J_τ^{d²(Z_{k+1},·)}(S_k)` with
/// `Z_k` i.i.d. from `μ`, replicated `replications` times.
///
/// Replication `r` draws from stream `(cfg.seed, r)`. Runs `cfg.max_steps`
/// steps, defaulting to the ceiling of `d²(p, S_0)/(τε)`. The bound is
/// inflated by `2D√t + t` with `t` the certification tolerance of `p`.
pub fn run_lln<S: GeodesicSpace>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    s0: &S::Point,
    cfg: &SchemeConfig,
    reference: &BarycenterResult<S::Point>,
    replications: usize,
) -> Result<(LlnSummary, Vec<TrajectoryRecord<S::Point>>)> {
    cfg.validate()?;
    if replications == 0 {
        return invalid("at least one replication is required");
    }
    validate_measure(space, mu)?;
    space.validate(s0)?;
    let (tau, delta, eps) = (cfg.tau, cfg.delta, cfg.epsilon);
    let p = &reference.point;
    let k0_bound = space.distance(p, s0).powi(2) / (tau * eps);
    let steps = steps_for(k0_bound, cfg.max_steps);
    let sampler = WeightedIndex::new(mu.weights()).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let paths: Vec<Vec<S::Point>> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<S::Point>> {
            let mut rng = stream_rng(cfg.seed, r as u64);
            let mut path = Vec::with_capacity(steps + 1);
            let mut s = s0.clone();
            path.push(s.clone());
            for _ in 0..steps {
                let z = &mu.support()[rng.sample(&sampler)];
                s = proximal_sqdist(space, z, &s, tau)?;
                path.push(s.clone());
            }
            Ok(path)
        })
        .collect::<Result<_>>()?;

    let mut touched = vec![p.clone()];
    touched.extend(mu.support().iter().cloned());
    touched.extend(paths.iter().flatten().cloned());
    let d_omega = space.set_diameter(&touched);
    drop(touched);
    let theta = theta_omega(d_omega, tau, delta);
    let tol = reference.tolerance.max(0.0);
    let rhs = 8.0 * d_omega * d_omega * tau
        + (theta + 16.0 * d_omega + 16.0 * delta) * delta
        + eps
        + 2.0 * d_omega * tol.sqrt()
        + tol;

    let d2: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|path| path.iter().map(|s| space.distance(p, s).powi(2)).collect())
        .collect();
    let objective: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|path| path.iter().map(|s| w2_variance(space, mu, s)).collect())
        .collect();

    let column = |rows: &[Vec<f64>], k: usize| mean_se(rows.iter().map(move |row| row[k]));
    let (estimates, standard_errors): (Vec<f64>, Vec<f64>) = (0..=steps).map(|k| column(&d2, k)).unzip();
    let objective_means = (0..=steps).map(|k| column(&objective, k).0).collect();

    let argmin_k = (0..steps).fold(0, |best, k| if estimates[k] < estimates[best] { k } else { best });
    let min_estimate = estimates[argmin_k];
    let se_at_min = standard_errors[argmin_k];
    let bound_holds = min_estimate <= rhs + 3.0 * se_at_min;

    let step_rhs = 8.0 * d_omega * d_omega * tau * tau
        + (theta + 16.0 * d_omega + 16.0 * delta) * delta * tau
        + tau * (2.0 * d_omega * tol.sqrt() + tol);
    let mut recursion_max_violation = f64::NEG_INFINITY;
    for k in 0..steps {
        let (mean, se) = mean_se(d2.iter().map(|row| row[k + 1] - (1.0 - tau) * row[k]));
        recursion_max_violation = recursion_max_violation.max(mean - (step_rhs + 3.0 * se));
    }
    let recursion_holds = steps == 0 || recursion_max_violation <= SLACK;

    let records = paths
        .into_iter()
        .zip(d2)
        .zip(objective)
        .map(|((iterates, d2), objective)| TrajectoryRecord {
            iterates,
            objective_values: objective,
            d2_to_reference: d2,
            k0: None,
            k0_bound,
            bound_rhs: rhs,
            d_omega,
            theta_omega: theta,
            delta,
            distance_bound: None,
            distance_at_k0: None,
            descent_max_violation: f64::NEG_INFINITY,
            violation: false,
            omega_mode: cfg.omega_mode,
        })
        .collect();
    let summary = LlnSummary {
        replications,
        steps,
        estimates,
        standard_errors,
        objective_means,
        min_estimate,
        argmin_k,
        se_at_min,
        k0_bound,
        bound_rhs: rhs,
        d_omega,
        theta_omega: theta,
        delta,
        bound_holds,
        recursion_max_violation,
        recursion_holds,
        violation: !(bound_holds && recursion_holds),
    };
    Ok((summary, records))
}

/// Barycenters `σ_k` of the empirical measures of an i.i.d. sample from `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: Deserialize<'de>"))]
pub struct EmpiricalLlnRecord<P> {
    /// `sigma[k - 1]` is the barycenter of the first `k` samples.
    pub sigma: Vec<P>,
    pub distances: Vec<f64>,
    pub w1: Vec<f64>,
    /// Per-`k` contraction bound `W1(μ,ν_k) + (8δ ∨ √(54D√(D+δ)√δ))`.
    pub contraction_bounds: Vec<f64>,
    /// Asymptotic bound `8δ ∨ √(54D√(D+δ)√δ)` with `D = 3 diam(supp μ)`.
    pub bound: f64,
    pub d: f64,
    pub delta: f64,
    pub contraction_max_violation: f64,
    pub violation: bool,
}

pub fn run_empirical_lln<S: Barycentric>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    k_max: usize,
    seed: u64,
    reference: &BarycenterResult<S::Point>,
    delta: f64,
    opts: &SolverOptions,
) -> Result<EmpiricalLlnRecord<S::Point>> {
    if !(delta.is_finite() && delta >= 0.0) {
        return invalid(format!("delta must be nonnegative, got {delta}"));
    }
    validate_measure(space, mu)?;
    let d = 3.0 * space.set_diameter(mu.support());
    let excess = (8.0 * delta).max((54.0 * d * (d + delta).sqrt() * delta.sqrt()).sqrt());
    let sampler = WeightedIndex::new(mu.weights()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = stream_rng(seed, 0);
    let draws: Vec<usize> = (0..k_max).map(|_| rng.sample(&sampler)).collect();

    let p = &reference.point;
    let p_slack = reference.tolerance.max(0.0).sqrt();
    let per_k: Vec<(S::Point, f64, f64, f64)> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let mut counts = vec![0u64; mu.len()];
            for &i in &draws[..k] {
                counts[i] += 1;
            }
            let nu = DiscreteMeasure::from_counts(mu.support(), &counts)?;
            let sigma = space.barycenter(&nu, opts)?;
            let dist = space.distance(p, &sigma.point);
            let (w1, _) = wasserstein(space, Order::One, mu, &nu)?;
            let slack = p_slack + sigma.tolerance.max(0.0).sqrt();
            Ok((sigma.point, dist, w1, slack))
        })
        .collect::<Result<_>>()?;

    let mut record = EmpiricalLlnRecord {
        sigma: Vec::with_capacity(k_max),
        distances: Vec::with_capacity(k_max),
        w1: Vec::with_capacity(k_max),
        contraction_bounds: Vec::with_capacity(k_max),
        bound: excess,
        d,
        delta,
        contraction_max_violation: f64::NEG_INFINITY,
        violation: false,
    };
    for (sigma, dist, w1, slack) in per_k {
        let b = w1 + excess;
        record.contraction_max_violation = record.contraction_max_violation.max(dist - b);
        record.violation |= dist > b + slack + SLACK;
        record.sigma.push(sigma);
        record.distances.push(dist);
        record.w1.push(w1);
        record.contraction_bounds.push(b);
    }
    Ok(record)
}
