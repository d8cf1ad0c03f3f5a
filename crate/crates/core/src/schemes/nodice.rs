use serde_json::json;

use super::{proximal_sqdist, steps_for, theta_omega, SchemeConfig, TrajectoryRecord, SLACK};
use crate::barycenter::BarycenterResult;
use crate::error::{invalid, Error, Result};
use crate::spaces::GeodesicSpace;

fn sum_sq<S: GeodesicSpace>(space: &S, z: &[S::Point], y: &S::Point) -> f64 {
    z.iter().map(|zi| space.distance(zi, y).powi(2)).sum()
}

/// Cyclic proximal iteration `y_{kn+i} = J_τ^{f_i}(y_{kn+i-1})` with
/// `f_i = d²(z_i, ·)`, measured against the minimiser `p` of `Σ f_i`.
///
/// The run length is `cfg.max_steps` cycles, defaulting to the ceiling of
/// `d²(p, y0) / (2τε)`. Records only the cycle ends `y_{kn}`; `D_Ω` is taken
/// over `p`, the `z_i` and every intermediate iterate.
///
/// Returns a theorem-violation error when no cycle meets the objective bound
/// although the run covered the whole guaranteed range.
pub fn run_nodice<S: GeodesicSpace>(
    space: &S,
    z: &[S::Point],
    y0: &S::Point,
    cfg: &SchemeConfig,
    reference: &BarycenterResult<S::Point>,
) -> Result<TrajectoryRecord<S::Point>> {
    cfg.validate()?;
    if z.is_empty() {
        return invalid("the deterministic scheme needs at least one point");
    }
    for q in z.iter().chain([y0, &reference.point]) {
        space.validate(q)?;
    }
    let n = z.len();
    let nf = n as f64;
    let (tau, delta, eps) = (cfg.tau, cfg.delta, cfg.epsilon);
    let p = &reference.point;
    let k0_bound = space.distance(p, y0).powi(2) / (2.0 * tau * eps);
    let cycles = steps_for(k0_bound, cfg.max_steps);

    let mut touched: Vec<S::Point> = Vec::with_capacity(n * (cycles + 1) + 2);
    touched.push(p.clone());
    touched.extend(z.iter().cloned());
    touched.push(y0.clone());
    let mut ends = vec![y0.clone()];
    let mut y = y0.clone();
    for _ in 0..cycles {
        for zi in z {
            y = proximal_sqdist(space, zi, &y, tau)?;
            touched.push(y.clone());
        }
        ends.push(y.clone());
    }
    let d_omega = space.set_diameter(&touched);
    drop(touched);
    let theta = theta_omega(d_omega, tau, delta);

    let f_p = sum_sq(space, z, p);
    let objective: Vec<f64> = ends.iter().map(|y| sum_sq(space, z, y)).collect();
    let d2: Vec<f64> = ends.iter().map(|y| space.distance(p, y).powi(2)).collect();
    let excess = nf * theta * delta / 2.0 + 2.0 * nf * (nf + 1.0) * d_omega * d_omega * tau;
    let bound_rhs = f_p + excess + eps;
    let k0 = objective.iter().position(|&f| f <= bound_rhs);

    let mut descent_max_violation = f64::NEG_INFINITY;
    let mut descent_failed = false;
    for k in 0..cycles {
        let rhs = d2[k] - 2.0 * tau * (objective[k] - f_p - excess);
        let gap = d2[k + 1] - rhs;
        descent_max_violation = descent_max_violation.max(gap);
        descent_failed |= gap > SLACK * (1.0 + d2[k]);
    }

    let (distance_bound, distance_at_k0) = match k0 {
        Some(k) => {
            let b = ((16.0 * d_omega + theta) * delta
                + 16.0 * delta * delta
                + 4.0 * (nf + 1.0) * d_omega * d_omega * tau
                + 2.0 * eps / nf)
                .sqrt();
            (Some(b), Some(d2[k].sqrt()))
        }
        None => (None, None),
    };
    // An approximate `p` sits within √tolerance of the true minimiser.
    let p_slack = reference.tolerance.max(0.0).sqrt();
    let distance_failed = matches!((distance_bound, distance_at_k0), (Some(b), Some(d)) if d > b + p_slack + SLACK);
    let k0_failed = k0.is_some_and(|k| k as f64 >= k0_bound.max(1.0));

    let record = TrajectoryRecord {
        iterates: ends,
        objective_values: objective,
        d2_to_reference: d2,
        k0,
        k0_bound,
        bound_rhs,
        d_omega,
        theta_omega: theta,
        delta,
        distance_bound,
        distance_at_k0,
        descent_max_violation,
        violation: descent_failed || distance_failed || k0_failed,
        omega_mode: cfg.omega_mode,
    };
    if k0.is_none() && cycles >= (k0_bound.ceil() as usize).max(1) {
        return Err(Error::TheoremViolation {
            what: format!("no cycle within {cycles} reached the objective bound {bound_rhs}"),
            witness: json!({
                "z": z,
                "y0": y0,
                "p": p,
                "config": cfg,
                "record": record,
            }),
        });
    }
    Ok(record)
}
