//! Randomized checks of the metric inequalities behind the error bounds.
//!
//! Each check draws instances from the space's sampling distribution, records
//! `lhs - rhs`, and keeps the worst instance as a replayable witness. Trials
//! are split into fixed chunks with one random stream per chunk and reduced
//! in chunk order, so reports do not depend on the number of threads.

mod checks;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use checks::{
    Busemann, Cat0General, Cat0Midpoint, Check, KeyEstimate, ProjectionLemma, VarianceInequality,
    WassersteinContraction,
};

use crate::barycenter::Barycentric;
use crate::error::{invalid, Result};
use crate::hyperbolicity::DeltaPolicy;
use crate::rng::{stream_id, stream_rng};
use crate::spaces::{AnySpace, SpaceKind};

/// Default violation threshold on `lhs - rhs`.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

const CHUNK: u64 = 1000;
const STREAM_TAG_BASE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityId {
    Cat0Midpoint,
    Cat0General,
    Busemann,
    KeyEstimate,
    ProjectionLemma,
    WassersteinContraction,
    VarianceInequality,
}

impl InequalityId {
    pub const ALL: [InequalityId; 7] = [
        InequalityId::Cat0Midpoint,
        InequalityId::Cat0General,
        InequalityId::Busemann,
        InequalityId::KeyEstimate,
        InequalityId::ProjectionLemma,
        InequalityId::WassersteinContraction,
        InequalityId::VarianceInequality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InequalityId::Cat0Midpoint => "cat0-midpoint",
            InequalityId::Cat0General => "cat0-general",
            InequalityId::Busemann => "busemann",
            InequalityId::KeyEstimate => "key-estimate",
            InequalityId::ProjectionLemma => "projection-lemma",
            InequalityId::WassersteinContraction => "wasserstein-contraction",
            InequalityId::VarianceInequality => "variance-inequality",
        }
    }

    fn tag(self) -> u32 {
        STREAM_TAG_BASE + self as u32
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for InequalityId {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match InequalityId::ALL.into_iter().find(|id| id.name() == s) {
            Some(id) => Ok(id),
            None => invalid(format!("unknown inequality {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub space: SpaceKind,
    pub trials: u64,
    /// Trials whose draw met the inequality's hypotheses.
    pub evaluated: u64,
    pub skipped: u64,
    pub violations: u64,
    /// Largest `lhs - rhs` seen; `None` when nothing was evaluated.
    pub max_violation: Option<f64>,
    /// The instance attaining `max_violation`.
    pub witness: Option<serde_json::Value>,
    pub delta_used: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct ChunkResult<I> {
    evaluated: u64,
    skipped: u64,
    violations: u64,
    worst: Option<(f64, I)>,
}

fn run<S: Barycentric, C: Check<S>>(
    space: &S,
    trials: u64,
    delta: f64,
    seed: u64,
    tolerance: f64,
) -> Result<InequalityReport> {
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<ChunkResult<C::Instance>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream_id(C::ID.tag(), c));
            let mut part = ChunkResult { evaluated: 0, skipped: 0, violations: 0, worst: None };
            for _ in 0..CHUNK.min(trials - c * CHUNK) {
                let Some(inst) = C::sample(space, delta, &mut rng)? else {
                    part.skipped += 1;
                    continue;
                };
                let v = C::evaluate(space, &inst, delta)?;
                part.evaluated += 1;
                if v > tolerance {
                    part.violations += 1;
                }
                if part.worst.as_ref().is_none_or(|w| v > w.0) {
                    part.worst = Some((v, inst));
                }
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let mut report = InequalityReport {
        id: C::ID,
        space: space.kind(),
        trials,
        evaluated: 0,
        skipped: 0,
        violations: 0,
        max_violation: None,
        witness: None,
        delta_used: delta,
        seed,
        tolerance,
    };
    let mut worst: Option<(f64, C::Instance)> = None;
    for part in parts {
        report.evaluated += part.evaluated;
        report.skipped += part.skipped;
        report.violations += part.violations;
        if let Some(w) = part.worst {
            if worst.as_ref().is_none_or(|b| w.0 > b.0) {
                worst = Some(w);
            }
        }
    }
    if let Some((v, inst)) = worst {
        report.max_violation = Some(v);
        report.witness = Some(serde_json::to_value(&inst)?);
    }
    Ok(report)
}

fn replay_with<S: Barycentric, C: Check<S>>(space: &S, witness: &serde_json::Value, delta: f64) -> Result<f64> {
    let inst: C::Instance = serde_json::from_value(witness.clone())?;
    C::evaluate(space, &inst, delta)
}

/// Runs one check with `trials` random instances.
pub fn run_check<S: Barycentric>(
    space: &S,
    id: InequalityId,
    trials: u64,
    delta: f64,
    seed: u64,
    tolerance: f64,
) -> Result<InequalityReport> {
    if !(delta.is_finite() && delta >= 0.0) {
        return invalid(format!("delta must be nonnegative, got {delta}"));
    }
    match id {
        InequalityId::Cat0Midpoint => run::<S, Cat0Midpoint>(space, trials, delta, seed, tolerance),
        InequalityId::Cat0General => run::<S, Cat0General>(space, trials, delta, seed, tolerance),
        InequalityId::Busemann => run::<S, Busemann>(space, trials, delta, seed, tolerance),
        InequalityId::KeyEstimate => run::<S, KeyEstimate>(space, trials, delta, seed, tolerance),
        InequalityId::ProjectionLemma => run::<S, ProjectionLemma>(space, trials, delta, seed, tolerance),
        InequalityId::WassersteinContraction => {
            run::<S, WassersteinContraction>(space, trials, delta, seed, tolerance)
        }
        InequalityId::VarianceInequality => run::<S, VarianceInequality>(space, trials, delta, seed, tolerance),
    }
}

/// Re-evaluates a report's witness, returning its `lhs - rhs`.
pub fn replay_witness<S: Barycentric>(space: &S, report: &InequalityReport) -> Result<Option<f64>> {
    let Some(w) = &report.witness else {
        return Ok(None);
    };
    let d = report.delta_used;
    let v = match report.id {
        InequalityId::Cat0Midpoint => replay_with::<S, Cat0Midpoint>(space, w, d),
        InequalityId::Cat0General => replay_with::<S, Cat0General>(space, w, d),
        InequalityId::Busemann => replay_with::<S, Busemann>(space, w, d),
        InequalityId::KeyEstimate => replay_with::<S, KeyEstimate>(space, w, d),
        InequalityId::ProjectionLemma => replay_with::<S, ProjectionLemma>(space, w, d),
        InequalityId::WassersteinContraction => replay_with::<S, WassersteinContraction>(space, w, d),
        InequalityId::VarianceInequality => replay_with::<S, VarianceInequality>(space, w, d),
    }?;
    Ok(Some(v))
}

pub fn check_cat0_midpoint<S: Barycentric>(space: &S, trials: u64, delta: f64, seed: u64) -> Result<InequalityReport> {
    run_check(space, InequalityId::Cat0Midpoint, trials, delta, seed, DEFAULT_TOLERANCE)
}

pub fn check_cat0_general<S: Barycentric>(space: &S, trials: u64, delta: f64, seed: u64) -> Result<InequalityReport> {
    run_check(space, InequalityId::Cat0General, trials, delta, seed, DEFAULT_TOLERANCE)
}

pub fn check_busemann<S: Barycentric>(space: &S, trials: u64, delta: f64, seed: u64) -> Result<InequalityReport> {
    run_check(space, InequalityId::Busemann, trials, delta, seed, DEFAULT_TOLERANCE)
}

pub fn check_key_estimate<S: Barycentric>(space: &S, trials: u64, delta: f64, seed: u64) -> Result<InequalityReport> {
    run_check(space, InequalityId::KeyEstimate, trials, delta, seed, DEFAULT_TOLERANCE)
}

pub fn check_projection_lemma<S: Barycentric>(space: &S, trials: u64, delta: f64, seed: u64) -> Result<InequalityReport> {
    run_check(space, InequalityId::ProjectionLemma, trials, delta, seed, DEFAULT_TOLERANCE)
}

pub fn check_wasserstein_contraction<S: Barycentric>(
    space: &S,
    trials: u64,
    delta: f64,
    seed: u64,
) -> Result<InequalityReport> {
    run_check(space, InequalityId::WassersteinContraction, trials, delta, seed, DEFAULT_TOLERANCE)
}

pub fn check_variance_inequality<S: Barycentric>(
    space: &S,
    trials: u64,
    delta: f64,
    seed: u64,
) -> Result<InequalityReport> {
    run_check(space, InequalityId::VarianceInequality, trials, delta, seed, DEFAULT_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub trials: u64,
    pub delta: DeltaPolicy,
    pub seed: u64,
    pub tolerance: f64,
    pub checks: Vec<InequalityId>,
}

impl SuiteConfig {
    pub fn new(trials: u64, delta: DeltaPolicy, seed: u64) -> Self {
        Self { trials, delta, seed, tolerance: DEFAULT_TOLERANCE, checks: InequalityId::ALL.to_vec() }
    }
}

/// Reports of one space's suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub space: SpaceKind,
    pub delta_used: f64,
    /// The estimate behind `delta_used`, when estimated.
    pub delta_hat: Option<f64>,
    /// Whether δ had to be re-estimated with a larger budget.
    pub reestimated: bool,
    pub reports: Vec<InequalityReport>,
}

fn suite_for<S: Barycentric>(space: &S, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let (delta, est) = cfg.delta.resolve(space, cfg.seed)?;
    let run_all = |delta: f64| -> Result<Vec<InequalityReport>> {
        cfg.checks
            .iter()
            .map(|&id| run_check(space, id, cfg.trials, delta, cfg.seed, cfg.tolerance))
            .collect()
    };
    let reports = run_all(delta)?;
    let failing = reports.iter().any(|r| !r.passed());
    if let (true, DeltaPolicy::Estimate { budget, safety }) = (failing, cfg.delta) {
        // A violation under an estimated δ may just mean the estimate was low.
        let retry = DeltaPolicy::Estimate { budget: budget.saturating_mul(10), safety };
        let (delta2, est2) = retry.resolve(space, cfg.seed)?;
        return Ok(SuiteReport {
            space: space.kind(),
            delta_used: delta2,
            delta_hat: est2.map(|e| e.delta_hat),
            reestimated: true,
            reports: run_all(delta2)?,
        });
    }
    Ok(SuiteReport {
        space: space.kind(),
        delta_used: delta,
        delta_hat: est.map(|e| e.delta_hat),
        reestimated: false,
        reports,
    })
}

/// Runs the configured checks on every space.
pub fn run_suite(spaces: &[AnySpace], cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    if !(cfg.tolerance.is_finite() && cfg.tolerance >= 0.0) {
        return invalid(format!("tolerance must be nonnegative, got {}", cfg.tolerance));
    }
    spaces
        .iter()
        .map(|s| match s {
            AnySpace::Tree(t) => suite_for(t, cfg),
            AnySpace::Disk(d) => suite_for(d, cfg),
            AnySpace::Plane(p) => suite_for(p, cfg),
        })
        .collect()
}

/// Replays a witness for a space chosen at run time.
pub fn replay_any(space: &AnySpace, report: &InequalityReport) -> Result<Option<f64>> {
    match space {
        AnySpace::Tree(t) => replay_witness(t, report),
        AnySpace::Disk(d) => replay_witness(d, report),
        AnySpace::Plane(p) => replay_witness(p, report),
    }
}

/// Fixed-width summary table, one row per report.
pub fn summary_table(suites: &[SuiteReport]) -> String {
    let mut out = format!(
        "{:<6} {:<24} {:>10} {:>10} {:>10} {:>14} {:>12}\n",
        "space", "inequality", "trials", "evaluated", "violations", "max lhs-rhs", "delta"
    );
    for s in suites {
        for r in &s.reports {
            let worst = r.max_violation.map_or("-".to_string(), |v| format!("{v:.6e}"));
            out.push_str(&format!(
                "{:<6} {:<24} {:>10} {:>10} {:>10} {:>14} {:>12.6}\n",
                r.space.to_string(),
                r.id.name(),
                r.trials,
                r.evaluated,
                r.violations,
                worst,
                r.delta_used
            ));
        }
    }
    out
}
