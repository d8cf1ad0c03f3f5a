use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use hyperbary::hyperbolicity::{DeltaPolicy, DEFAULT_SAFETY};
use hyperbary::verify::{InequalityId, DEFAULT_TOLERANCE};

#[derive(Debug, Parser)]
#[command(name = "hyperbary", version, about = "Barycenters on Gromov hyperbolic spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Estimate the four-point hyperbolicity constant of a region.
    EstimateDelta(EstimateDeltaArgs),
    /// Compute the barycenter of a measure.
    Barycenter(BarycenterArgs),
    /// Exact Wasserstein distance between two measures.
    Wasserstein(WassersteinArgs),
    /// Run the deterministic cyclic proximal scheme.
    Nodice(NodiceArgs),
    /// Run the stochastic proximal scheme with Monte Carlo replications.
    Lln(LlnArgs),
    /// Track barycenters of growing empirical measures.
    EmpiricalLln(EmpiricalLlnArgs),
    /// Run the randomized inequality checks.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EstimateDelta(_) => "estimate-delta",
            Command::Barycenter(_) => "barycenter",
            Command::Wasserstein(_) => "wasserstein",
            Command::Nodice(_) => "nodice",
            Command::Lln(_) => "lln",
            Command::EmpiricalLln(_) => "empirical-lln",
            Command::Verify(_) => "verify",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::EstimateDelta(a) => &a.common,
            Command::Barycenter(a) => &a.common,
            Command::Wasserstein(a) => &a.common,
            Command::Nodice(a) => &a.common,
            Command::Lln(a) => &a.common,
            Command::EmpiricalLln(a) => &a.common,
            Command::Verify(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Options shared by every subcommand. Only `seed` and `format` are part of
/// the recorded configuration; the rest do not affect results.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Seed for every random draw (required).
    #[arg(long, required = true)]
    pub seed: u64,
    /// Output file prefix.
    #[arg(long, default_value = "hyperbary")]
    #[serde(skip)]
    pub out: String,
    /// Format of the per-iteration trace.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker thread cap; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Key-value file of defaults, one `key = value` per line.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// `<value>` for a fixed δ or `estimate:<budget>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSpec {
    Fixed(f64),
    Estimate(u64),
}

impl FromStr for DeltaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(budget) = s.strip_prefix("estimate:") {
            return match budget.parse::<u64>() {
                Ok(b) if b > 0 => Ok(DeltaSpec::Estimate(b)),
                _ => Err(format!("estimation budget must be a positive integer, got {budget:?}")),
            };
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(DeltaSpec::Fixed(v)),
            _ => Err(format!("expected a nonnegative number or estimate:<budget>, got {s:?}")),
        }
    }
}

impl fmt::Display for DeltaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSpec::Fixed(v) => write!(f, "{v:?}"),
            DeltaSpec::Estimate(b) => write!(f, "estimate:{b}"),
        }
    }
}

impl Serialize for DeltaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DeltaSpec::Fixed(v) => s.serialize_f64(*v),
            DeltaSpec::Estimate(_) => s.serialize_str(&self.to_string()),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DeltaArgs {
    /// Hyperbolicity constant used in the bounds.
    #[arg(long, default_value = "estimate:100000")]
    pub delta: DeltaSpec,
    /// Factor applied to an estimated δ.
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    pub safety: f64,
}

impl DeltaArgs {
    pub fn policy(&self) -> DeltaPolicy {
        match self.delta {
            DeltaSpec::Fixed(v) => DeltaPolicy::Fixed(v),
            DeltaSpec::Estimate(budget) => DeltaPolicy::Estimate { budget, safety: self.safety },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SolverArgs {
    /// Gradient-norm tolerance of the iterative barycenter solver.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateDeltaArgs {
    /// Tree file, `disk[:R]`, `plane[:R]` or `random-tree:<n>`.
    #[arg(long)]
    pub space: String,
    /// Quadruples to draw.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    /// Point-list file; without it quadruples come from the space's sampler.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct BarycenterArgs {
    #[arg(long)]
    pub space: String,
    /// Measure file, one `<weight> <point>` per line.
    #[arg(long)]
    pub measure: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct WassersteinArgs {
    #[arg(long)]
    pub space: String,
    /// The two measure files.
    #[arg(long, num_args = 1, required = true)]
    pub measure: Vec<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub order: u32,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct NodiceArgs {
    #[arg(long)]
    pub space: String,
    /// Point-list file with the points `z_1..z_n`.
    #[arg(long)]
    pub points: PathBuf,
    /// Initial point; defaults to the first listed point.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub epsilon: f64,
    /// Cycles to run; defaults to the guaranteed range.
    #[arg(long)]
    pub max_cycles: Option<usize>,
    #[command(flatten)]
    pub delta: DeltaArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct LlnArgs {
    #[arg(long)]
    pub space: String,
    #[arg(long)]
    pub measure: PathBuf,
    /// Initial point; defaults to the first support point.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    /// Steps to run; defaults to the guaranteed range.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[command(flatten)]
    pub delta: DeltaArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EmpiricalLlnArgs {
    #[arg(long)]
    pub space: String,
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub k_max: usize,
    #[command(flatten)]
    pub delta: DeltaArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

fn parse_check(s: &str) -> Result<InequalityId, String> {
    s.parse().map_err(|e: hyperbary::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Spaces to check; repeatable.
    #[arg(long, required = true)]
    pub space: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Violation threshold on `lhs - rhs`.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Comma-separated subset of checks; all by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_check)]
    pub checks: Vec<InequalityId>,
    #[command(flatten)]
    pub delta: DeltaArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Splices `key = value` lines of a config file into the argument list.
/// Keys given on the command line win; list-valued keys may repeat.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut config_path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let on_command_line = |key: &str| {
        argv.iter().any(|a| a == &format!("--{key}") || a.starts_with(&format!("--{key}=")))
    };
    let mut extra = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("config {path} line {}: expected key = value", n + 1));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') || key == "config" {
            return Err(format!("config {path} line {}: invalid key {key:?}", n + 1));
        }
        if !on_command_line(key) {
            extra.push(format!("--{key}"));
            extra.push(value.to_string());
        }
    }
    // Insert right after the subcommand so clap reports unknown keys by name.
    let sub = argv
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(argv.len(), |i| i + 2);
    let mut merged = argv[..sub.min(argv.len())].to_vec();
    merged.extend(extra);
    merged.extend(argv[sub.min(argv.len())..].iter().cloned());
    Ok(merged)
}
