use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use hyperbary::barycenter::{Barycentric, SolverOptions};
use hyperbary::hyperbolicity::{estimate_delta, DeltaPolicy, Region};
use hyperbary::rng::{stream_id, stream_rng};
use hyperbary::schemes::{run_empirical_lln, run_lln, run_nodice, SchemeConfig, TrajectoryRecord};
use hyperbary::spaces::io::{parse_point, parse_points, parse_tree};
use hyperbary::spaces::{AnySpace, EuclideanPlane, GeodesicSpace, MetricTree, PoincareDisk};
use hyperbary::transport::{parse_measure, wasserstein, DiscreteMeasure, Order};
use hyperbary::verify::{run_suite, summary_table, InequalityId, SuiteConfig};
use hyperbary::Error;

use crate::args::{
    BarycenterArgs, Command, DeltaArgs, EmpiricalLlnArgs, EstimateDeltaArgs, Format, LlnArgs, NodiceArgs,
    SolverArgs, VerifyArgs, WassersteinArgs,
};

const RANDOM_TREE_STREAM_TAG: u32 = 3;
const RANDOM_TREE_LENGTHS: (f64, f64) = (0.5, 2.0);

#[derive(Debug)]
pub enum Failure {
    Input(String),
    /// A bound failed; the witness goes to the report file.
    Violation { what: String, witness: Value },
}

impl Failure {
    fn field(field: &str, e: impl std::fmt::Display) -> Self {
        Failure::Input(format!("{field}: {e}"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TheoremViolation { what, witness } => Failure::Violation { what, witness },
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

macro_rules! with_space {
    ($any:expr, $s:ident => $body:expr) => {
        match $any {
            AnySpace::Tree($s) => $body,
            AnySpace::Disk($s) => $body,
            AnySpace::Plane($s) => $body,
        }
    };
}

fn parse_radius(field: &str, spec: &str, r: Option<&str>) -> Result<Option<f64>, Failure> {
    r.map(|r| r.parse::<f64>().map_err(|e| Failure::field(field, format!("{spec}: {e}")))).transpose()
}

/// A tree file, `disk[:R]`, `plane[:R]` or `random-tree:<n>`.
pub fn load_space(spec: &str, seed: u64) -> Result<AnySpace, Failure> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let space = match name {
        "disk" => match parse_radius("--space", spec, arg)? {
            Some(r) => AnySpace::Disk(PoincareDisk::new(r).map_err(|e| Failure::field("--space", e))?),
            None => AnySpace::Disk(PoincareDisk::default()),
        },
        "plane" => match parse_radius("--space", spec, arg)? {
            Some(r) => AnySpace::Plane(EuclideanPlane::new(r).map_err(|e| Failure::field("--space", e))?),
            None => AnySpace::Plane(EuclideanPlane::default()),
        },
        "random-tree" => {
            let n: usize = arg
                .unwrap_or("")
                .parse()
                .map_err(|e| Failure::field("--space", format!("{spec}: vertex count: {e}")))?;
            let mut rng = stream_rng(seed, stream_id(RANDOM_TREE_STREAM_TAG, 0));
            let (lo, hi) = RANDOM_TREE_LENGTHS;
            AnySpace::Tree(MetricTree::random(n, lo, hi, &mut rng).map_err(|e| Failure::field("--space", e))?)
        }
        _ => {
            let text = read("--space", Path::new(spec))?;
            AnySpace::Tree(parse_tree(&text).map_err(|e| Failure::field("--space", format!("{spec}: {e}")))?)
        }
    };
    Ok(space)
}

fn read(field: &str, path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::field(field, format!("{}: {e}", path.display())))
}

fn load_measure<S: GeodesicSpace>(space: &S, field: &str, path: &Path) -> Result<DiscreteMeasure<S::Point>, Failure> {
    let text = read(field, path)?;
    parse_measure(space, &text).map_err(|e| Failure::field(field, format!("{}: {e}", path.display())))
}

fn load_start<S: GeodesicSpace>(space: &S, start: Option<&str>, fallback: &S::Point) -> Result<S::Point, Failure> {
    match start {
        Some(text) => parse_point(space, text).map_err(|e| Failure::field("--start", e)),
        None => Ok(fallback.clone()),
    }
}

fn solver_options(a: &SolverArgs) -> Result<SolverOptions, Failure> {
    if !(a.tol.is_finite() && a.tol > 0.0) {
        return Err(Failure::field("--tol", format!("must be positive, got {}", a.tol)));
    }
    Ok(SolverOptions { tol: a.tol, max_iter: a.max_iter })
}

fn resolve_delta<S: GeodesicSpace>(space: &S, d: &DeltaArgs, seed: u64) -> Result<(f64, Value), Failure> {
    let policy = d.policy();
    policy.validate().map_err(|e| Failure::field("--delta", e))?;
    let (delta, est) = policy.resolve(space, seed)?;
    let audit = match policy {
        DeltaPolicy::Fixed(_) => json!({ "policy": "fixed", "delta": delta }),
        DeltaPolicy::Estimate { budget, safety } => json!({
            "policy": "estimate",
            "budget": budget,
            "safety": safety,
            "delta_hat": est.map(|e| e.delta_hat),
            "delta": delta,
        }),
    };
    Ok((delta, audit))
}

fn refs<S: GeodesicSpace>(space: &S, pts: &[S::Point]) -> Value {
    json!(pts.iter().map(|p| space.to_ref(p)).collect::<Vec<_>>())
}

/// Writes the output files of one invocation. Every file carries the
/// resolved configuration and the δ in force.
pub struct Outputs {
    prefix: String,
    format: Format,
    command: &'static str,
    config: Value,
    delta: Value,
}

impl Outputs {
    pub fn new(command: &Command) -> Self {
        let common = command.common();
        Self {
            prefix: common.out.clone(),
            format: common.format,
            command: command.name(),
            config: serde_json::to_value(command).expect("configuration serializes"),
            delta: Value::Null,
        }
    }

    fn header(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command));
        m.insert("config".into(), self.config.clone());
        m.insert("delta".into(), self.delta.clone());
        m
    }

    fn path(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.prefix)
    }

    fn write(&self, suffix: &str, contents: &[u8]) -> Outcome {
        let path = self.path(suffix);
        let mut f = fs::File::create(&path).map_err(|e| Failure::field("--out", format!("{path}: {e}")))?;
        f.write_all(contents).map_err(|e| Failure::field("--out", format!("{path}: {e}")))
    }

    fn write_json(&self, suffix: &str, body: Value) -> Outcome {
        let mut doc = self.header();
        match body {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON serializes");
        text.push('\n');
        self.write(suffix, text.as_bytes())
    }

    pub fn summary(&self, body: Value) -> Outcome {
        self.write_json("summary.json", body)
    }

    pub fn report(&self, body: Value) -> Outcome {
        self.write_json("report.json", body)
    }

    /// Per-iteration table; the first column is the integer index `k`.
    pub fn trace(&self, columns: &[&str], rows: &[Vec<f64>]) -> Outcome {
        match self.format {
            Format::Json => {
                let rows: Vec<Value> = rows
                    .iter()
                    .enumerate()
                    .map(|(k, r)| {
                        let mut m = Map::new();
                        m.insert(columns[0].into(), json!(k));
                        for (c, v) in columns[1..].iter().zip(r) {
                            m.insert((*c).into(), json!(v));
                        }
                        Value::Object(m)
                    })
                    .collect();
                self.write_json("trace.json", json!({ "columns": columns, "rows": rows }))
            }
            Format::Csv => {
                let mut meta = self.header();
                meta.insert("columns".into(), json!(columns));
                let mut text = format!("# {}\n", Value::Object(meta));
                text.push_str(&columns.join(","));
                text.push('\n');
                for (k, r) in rows.iter().enumerate() {
                    text.push_str(&k.to_string());
                    for v in r {
                        text.push(',');
                        text.push_str(&format!("{v:.16e}"));
                    }
                    text.push('\n');
                }
                self.write("trace.csv", text.as_bytes())
            }
        }
    }
}

pub fn execute(command: &Command, out: &mut Outputs) -> Outcome {
    match command {
        Command::EstimateDelta(a) => {
            let space = load_space(&a.space, a.common.seed)?;
            with_space!(&space, s => estimate_delta_cmd(s, a, out))
        }
        Command::Barycenter(a) => {
            let space = load_space(&a.space, a.common.seed)?;
            with_space!(&space, s => barycenter_cmd(s, a, out))
        }
        Command::Wasserstein(a) => {
            let space = load_space(&a.space, a.common.seed)?;
            with_space!(&space, s => wasserstein_cmd(s, a, out))
        }
        Command::Nodice(a) => {
            let space = load_space(&a.space, a.common.seed)?;
            with_space!(&space, s => nodice_cmd(s, a, out))
        }
        Command::Lln(a) => {
            let space = load_space(&a.space, a.common.seed)?;
            with_space!(&space, s => lln_cmd(s, a, out))
        }
        Command::EmpiricalLln(a) => {
            let space = load_space(&a.space, a.common.seed)?;
            with_space!(&space, s => empirical_lln_cmd(s, a, out))
        }
        Command::Verify(a) => verify_cmd(a, out),
    }
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON serializes"));
}

fn estimate_delta_cmd<S: GeodesicSpace>(space: &S, a: &EstimateDeltaArgs, out: &mut Outputs) -> Outcome {
    let points = match &a.points {
        Some(path) => {
            let text = read("--points", path)?;
            Some(parse_points(space, &text).map_err(|e| Failure::field("--points", format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let region = match &points {
        Some(p) => Region::Points(p),
        None => Region::Sampler,
    };
    let est = estimate_delta(space, region, a.budget, a.common.seed)?;
    out.delta = json!(est.delta_hat);
    let body = json!({
        "delta_hat": est.delta_hat,
        "quadruples_checked": est.quadruples_checked,
        "mode": est.mode,
        "witness": refs(space, &est.witness),
    });
    print_json(&body);
    out.summary(body)
}

fn barycenter_cmd<S: Barycentric>(space: &S, a: &BarycenterArgs, out: &mut Outputs) -> Outcome {
    let mu = load_measure(space, "--measure", &a.measure)?;
    let b = space.barycenter(&mu, &solver_options(&a.solver)?)?;
    let body = json!({
        "point": space.to_ref(&b.point),
        "value": b.value,
        "method": b.method,
        "v_inf_estimate": b.v_inf_estimate,
        "tolerance": b.tolerance,
        "iterations": b.iterations,
    });
    print_json(&body);
    out.summary(body)
}

fn wasserstein_cmd<S: GeodesicSpace>(space: &S, a: &WassersteinArgs, out: &mut Outputs) -> Outcome {
    let [mu_path, nu_path] = a.measure.as_slice() else {
        return Err(Failure::field("--measure", format!("expected exactly two files, got {}", a.measure.len())));
    };
    let mu = load_measure(space, "--measure", mu_path)?;
    let nu = load_measure(space, "--measure", nu_path)?;
    let order = Order::try_from(a.order).map_err(|e| Failure::field("--order", e))?;
    let (value, plan) = wasserstein(space, order, &mu, &nu)?;
    let coupling: Vec<Vec<f64>> = (0..plan.rows).map(|i| (0..plan.cols).map(|j| plan.get(i, j)).collect()).collect();
    println!("{value:.16e}");
    out.summary(json!({ "order": a.order, "value": value, "coupling": coupling }))
}

/// The summary of a scheme run: the record without the full iterate list.
fn record_summary<S: GeodesicSpace>(space: &S, rec: &TrajectoryRecord<S::Point>, p: &S::Point) -> Value {
    let mut v = serde_json::to_value(rec).expect("record serializes");
    let m = v.as_object_mut().expect("record is an object");
    for key in ["iterates", "objective_values", "d2_to_reference"] {
        m.remove(key);
    }
    m.insert("steps".into(), json!(rec.iterates.len() - 1));
    m.insert("final_iterate".into(), json!(space.to_ref(rec.iterates.last().expect("start is recorded"))));
    m.insert("reference".into(), json!(space.to_ref(p)));
    v
}

fn scheme_config(tau: f64, eps: f64, delta: f64, seed: u64, max_steps: Option<usize>) -> Result<SchemeConfig, Failure> {
    let mut cfg = SchemeConfig::new(tau, eps, delta, seed).map_err(|e| {
        let field = if tau.is_finite() && tau > 0.0 { "--epsilon" } else { "--tau" };
        Failure::field(field, e)
    })?;
    cfg.max_steps = max_steps;
    Ok(cfg)
}

fn nodice_cmd<S: Barycentric>(space: &S, a: &NodiceArgs, out: &mut Outputs) -> Outcome {
    let text = read("--points", &a.points)?;
    let z = parse_points(space, &text).map_err(|e| Failure::field("--points", format!("{}: {e}", a.points.display())))?;
    let y0 = load_start(space, a.start.as_deref(), &z[0])?;
    let (delta, audit) = resolve_delta(space, &a.delta, a.common.seed)?;
    out.delta = audit;
    let cfg = scheme_config(a.tau, a.epsilon, delta, a.common.seed, a.max_cycles)?;
    // The minimiser of Σ d²(z_i, ·) is the barycenter of the uniform measure.
    let mu = DiscreteMeasure::uniform(z.clone())?;
    let p = space.barycenter(&mu, &solver_options(&a.solver)?)?;
    let rec = run_nodice(space, &z, &y0, &cfg, &p)?;
    let rows: Vec<Vec<f64>> = (0..rec.iterates.len())
        .map(|k| vec![rec.objective_values[k], rec.d2_to_reference[k], rec.bound_rhs])
        .collect();
    out.trace(&["k", "objective", "d2_to_p", "bound_rhs"], &rows)?;
    let summary = record_summary(space, &rec, &p.point);
    out.summary(summary.clone())?;
    if rec.violation {
        return Err(Failure::Violation { what: "deterministic scheme bound".into(), witness: summary });
    }
    Ok(())
}

fn lln_cmd<S: Barycentric>(space: &S, a: &LlnArgs, out: &mut Outputs) -> Outcome {
    let mu = load_measure(space, "--measure", &a.measure)?;
    let s0 = load_start(space, a.start.as_deref(), &mu.support()[0])?;
    let (delta, audit) = resolve_delta(space, &a.delta, a.common.seed)?;
    out.delta = audit;
    let cfg = scheme_config(a.tau, a.epsilon, delta, a.common.seed, a.max_steps)?;
    if a.replications == 0 {
        return Err(Failure::field("--replications", "must be at least 1"));
    }
    let p = space.barycenter(&mu, &solver_options(&a.solver)?)?;
    let (summary, _) = run_lln(space, &mu, &s0, &cfg, &p, a.replications)?;
    let rows: Vec<Vec<f64>> = (0..summary.estimates.len())
        .map(|k| vec![summary.objective_means[k], summary.estimates[k], summary.bound_rhs, summary.standard_errors[k]])
        .collect();
    out.trace(&["k", "objective", "d2_to_p", "bound_rhs", "se"], &rows)?;
    let mut body = serde_json::to_value(&summary).expect("summary serializes");
    let m = body.as_object_mut().expect("summary is an object");
    for key in ["estimates", "standard_errors", "objective_means"] {
        m.remove(key);
    }
    m.insert("reference".into(), json!(space.to_ref(&p.point)));
    m.insert("start".into(), json!(space.to_ref(&s0)));
    out.summary(body.clone())?;
    if summary.violation {
        return Err(Failure::Violation { what: "stochastic scheme bound".into(), witness: body });
    }
    Ok(())
}

fn empirical_lln_cmd<S: Barycentric>(space: &S, a: &EmpiricalLlnArgs, out: &mut Outputs) -> Outcome {
    let mu = load_measure(space, "--measure", &a.measure)?;
    if a.k_max == 0 {
        return Err(Failure::field("--k-max", "must be at least 1"));
    }
    let (delta, audit) = resolve_delta(space, &a.delta, a.common.seed)?;
    out.delta = audit;
    let opts = solver_options(&a.solver)?;
    let p = space.barycenter(&mu, &opts)?;
    let rec = run_empirical_lln(space, &mu, a.k_max, a.common.seed, &p, delta, &opts)?;
    // Row k describes the empirical measure of the first k + 1 samples.
    let rows: Vec<Vec<f64>> = (0..rec.sigma.len())
        .map(|k| vec![rec.w1[k], rec.distances[k], rec.contraction_bounds[k]])
        .collect();
    out.trace(&["k", "w1", "d_to_p", "contraction_bound"], &rows)?;
    let body = json!({
        "reference": space.to_ref(&p.point),
        "final_sigma": space.to_ref(rec.sigma.last().expect("k_max >= 1")),
        "final_distance": rec.distances.last(),
        "bound": rec.bound,
        "d": rec.d,
        "delta": rec.delta,
        "contraction_max_violation": rec.contraction_max_violation,
        "violation": rec.violation,
    });
    out.summary(body.clone())?;
    if rec.violation {
        return Err(Failure::Violation { what: "empirical contraction bound".into(), witness: body });
    }
    Ok(())
}

fn verify_cmd(a: &VerifyArgs, out: &mut Outputs) -> Outcome {
    let spaces = a
        .space
        .iter()
        .map(|s| load_space(s, a.common.seed))
        .collect::<Result<Vec<_>, _>>()?;
    if a.trials == 0 {
        return Err(Failure::field("--trials", "must be at least 1"));
    }
    if !(a.tolerance.is_finite() && a.tolerance >= 0.0) {
        return Err(Failure::field("--tolerance", format!("must be nonnegative, got {}", a.tolerance)));
    }
    let policy = a.delta.policy();
    policy.validate().map_err(|e| Failure::field("--delta", e))?;
    let mut cfg = SuiteConfig::new(a.trials, policy, a.common.seed);
    cfg.tolerance = a.tolerance;
    if !a.checks.is_empty() {
        cfg.checks = a.checks.clone();
    }
    let suites = run_suite(&spaces, &cfg)?;
    out.delta = json!(suites.iter().map(|s| s.delta_used).collect::<Vec<_>>());
    print!("{}", summary_table(&suites));
    let failed: Vec<InequalityId> =
        suites.iter().flat_map(|s| s.reports.iter()).filter(|r| !r.passed()).map(|r| r.id).collect();
    out.report(json!({ "suites": suites, "passed": failed.is_empty() }))?;
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|id| id.name()).collect();
        return Err(Failure::Violation {
            what: format!("violated: {}", names.join(", ")),
            witness: json!({ "suites": suites }),
        });
    }
    Ok(())
}
