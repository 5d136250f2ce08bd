//! Run configurations, the `solve` and `oracle` commands, and their file
//! outputs.
//!
//! A configuration is a TOML document with sections `[problem]`, `[start]`,
//! `[outer]`, `[inner]` and `[output]`. Unknown keys are rejected. Omitted
//! numeric settings take the library defaults.
//!
//! ```toml
//! [problem]
//! instance = "l2_truncated:4"
//!
//! [start]
//! random = 5
//! seed = 7
//!
//! [outer]
//! stop_tol = 1e-8
//!
//! [output]
//! trace = "trace.csv"
//! certificate = "certificate.json"
//! ```
//!
//! Instead of `instance`, `[problem]` may describe an affine problem inline:
//! `Phi(x) = B + M x + c` with `f(x, y) = <Q x + r, y - x>`.
//!
//! ```toml
//! [problem]
//! domain = { box = { lower = [0.0, 0.0], upper = [1.0, 1.0] } }
//! constraint_base = { ball = { center = [0.0, 0.0], radius = 0.1 } }
//! constraint_matrix = [[0.5, 0.0], [0.0, 0.5]]   # M, default 0
//! constraint_offset = [1.5, 0.0]                 # c, default 0
//! field_matrix = [[1.0, 0.0], [0.0, 1.0]]        # Q, default identity
//! field_offset = [0.0, 0.0]                      # r, default 0
//! ```
//!
//! Sets are written `box = { lower, upper }`, `ball = { center, radius }`,
//! `segment = { a, b }`, `polytope = { normals, offsets }` (rows
//! `<normal, z> <= offset`) or `orthant_ball = { dim, radius }`.
//!
//! `[start]` takes exactly one of `x0 = [...]`, `points = [[...], ...]` or
//! `random = count` (with optional `seed`, default 0).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::algorithm::{fixed_point_oracle, AlgorithmError, ClosedForm, Outcome, Procedure, RunResult};
use crate::ep_solver::{InnerConfig, InnerMethod};
use crate::geometry::{sample_point, ConvexSet, GeometryError, Halfspace, Vector};
use crate::instances::{instance_by_name, InstanceError};
use crate::problems::{estimate_constants, Bifunction, ConstraintMap, ProblemConstants, ProblemError, Qep};

/// Samples used for the constants in certificate summaries.
pub const SUMMARY_SAMPLE_COUNT: usize = 16;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { field: field.to_string(), message: message.into() }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Segment { a: Vec<f64>, b: Vec<f64> },
    Polytope { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    OrthantBall { dim: usize, radius: f64 },
}

impl SetSpec {
    pub fn build(&self) -> Result<ConvexSet, GeometryError> {
        let v = |xs: &[f64]| Vector::from_column_slice(xs);
        match self {
            SetSpec::Box { lower, upper } => ConvexSet::new_box(v(lower), v(upper)),
            SetSpec::Ball { center, radius } => ConvexSet::ball(v(center), *radius),
            SetSpec::Segment { a, b } => ConvexSet::segment(v(a), v(b)),
            SetSpec::Polytope { normals, offsets } => {
                if normals.len() != offsets.len() {
                    return Err(GeometryError::InvalidSet("normals and offsets differ in length".into()));
                }
                ConvexSet::polytope(normals.iter().zip(offsets).map(|(a, b)| Halfspace::new(v(a), *b)).collect())
            }
            SetSpec::OrthantBall { dim, radius } => ConvexSet::orthant_ball(*dim, *radius),
        }
    }
}

/// Affine problem: `Phi(x) = B + M x + c`, `f(x, y) = <Q x + r, y - x>`.
#[derive(Debug, Clone, PartialEq)]
pub struct InlineProblem {
    pub domain: SetSpec,
    pub constraint_base: SetSpec,
    pub constraint_matrix: Option<Vec<Vec<f64>>>,
    pub constraint_offset: Option<Vec<f64>>,
    pub field_matrix: Option<Vec<Vec<f64>>>,
    pub field_offset: Option<Vec<f64>>,
}

fn matrix(field: &str, rows: &Option<Vec<Vec<f64>>>, n: usize, default: DMatrix<f64>) -> Result<DMatrix<f64>, CliError> {
    let Some(rows) = rows else { return Ok(default) };
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(field, format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn offset(field: &str, values: &Option<Vec<f64>>, n: usize) -> Result<Vector, CliError> {
    match values {
        None => Ok(Vector::zeros(n)),
        Some(v) if v.len() == n => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(invalid(field, format!("expected {n} entries, found {}", v.len()))),
    }
}

impl InlineProblem {
    pub fn build(&self) -> Result<Qep, CliError> {
        let domain = self.domain.build().map_err(|e| invalid("problem.domain", e.to_string()))?;
        let base = self.constraint_base.build().map_err(|e| invalid("problem.constraint_base", e.to_string()))?;
        let n = domain.dim();
        if base.dim() != n {
            return Err(invalid("problem.constraint_base", format!("dimension {} differs from domain dimension {n}", base.dim())));
        }
        let m = matrix("problem.constraint_matrix", &self.constraint_matrix, n, DMatrix::zeros(n, n))?;
        let c = offset("problem.constraint_offset", &self.constraint_offset, n)?;
        let q = matrix("problem.field_matrix", &self.field_matrix, n, DMatrix::identity(n, n))?;
        let r = offset("problem.field_offset", &self.field_offset, n)?;
        let map = ConstraintMap::new(domain, move |x| Ok(base.clone().translate(&m * x + &c)?));
        let f = if q == DMatrix::identity(n, n) && r.iter().all(|&v| v == 0.0) {
            Bifunction::vi_identity(n)
        } else {
            Bifunction::vi(n, move |y| &q * y + &r)
        };
        Qep::new(f, map).map_err(|e| invalid("problem", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Named(String),
    Inline(InlineProblem),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    Point(Vec<f64>),
    Points(Vec<Vec<f64>>),
    /// `count` points of `C` drawn with ChaCha8 seeded by `seed`.
    Random { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub oracle: Option<PathBuf>,
    /// Run multistart starts on separate threads.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    pub start: StartSpec,
    pub outer: crate::algorithm::OuterConfig,
    pub output: OutputSpec,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    start: Option<RawStart>,
    outer: Option<RawOuter>,
    inner: Option<RawInner>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    instance: Option<String>,
    domain: Option<SetSpec>,
    constraint_base: Option<SetSpec>,
    constraint_matrix: Option<Vec<Vec<f64>>>,
    constraint_offset: Option<Vec<f64>>,
    field_matrix: Option<Vec<Vec<f64>>>,
    field_offset: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStart {
    x0: Option<Vec<f64>>,
    points: Option<Vec<Vec<f64>>>,
    random: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOuter {
    stop_tol: Option<f64>,
    max_iterations: Option<usize>,
    cycle_window: Option<usize>,
    cycle_tol: Option<f64>,
    certify_eps: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInner {
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
    step_size: Option<f64>,
    grid_resolution: Option<f64>,
    method: Option<InnerMethod>,
    grid_fallback: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    trace: Option<PathBuf>,
    certificate: Option<PathBuf>,
    summary: Option<PathBuf>,
    oracle: Option<PathBuf>,
    parallel: Option<bool>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunSpec, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;

    let p = raw.problem;
    let inline_given = p.domain.is_some()
        || p.constraint_base.is_some()
        || p.constraint_matrix.is_some()
        || p.constraint_offset.is_some()
        || p.field_matrix.is_some()
        || p.field_offset.is_some();
    let problem = match (p.instance, inline_given) {
        (Some(name), false) => ProblemSpec::Named(name),
        (None, true) => ProblemSpec::Inline(InlineProblem {
            domain: p.domain.ok_or_else(|| invalid("problem.domain", "missing"))?,
            constraint_base: p.constraint_base.ok_or_else(|| invalid("problem.constraint_base", "missing"))?,
            constraint_matrix: p.constraint_matrix,
            constraint_offset: p.constraint_offset,
            field_matrix: p.field_matrix,
            field_offset: p.field_offset,
        }),
        (Some(_), true) => return Err(invalid("problem", "give either `instance` or an inline problem, not both")),
        (None, false) => return Err(invalid("problem", "missing `instance`")),
    };

    let s = raw.start.unwrap_or_default();
    let start = match (s.x0, s.points, s.random) {
        (Some(x0), None, None) if s.seed.is_none() => StartSpec::Point(x0),
        (None, Some(points), None) if s.seed.is_none() => StartSpec::Points(points),
        (None, None, Some(count)) => StartSpec::Random { count, seed: s.seed.unwrap_or(0) },
        _ => return Err(invalid("start", "give exactly one of `x0`, `points` or `random` (with optional `seed`)")),
    };

    let defaults = crate::algorithm::OuterConfig::default();
    let o = raw.outer.unwrap_or_default();
    let i = raw.inner.unwrap_or_default();
    let inner_defaults = InnerConfig::default();
    let outer = crate::algorithm::OuterConfig {
        stop_tol: o.stop_tol.unwrap_or(defaults.stop_tol),
        max_iterations: o.max_iterations.unwrap_or(defaults.max_iterations),
        cycle_window: o.cycle_window.unwrap_or(defaults.cycle_window),
        cycle_tol: o.cycle_tol.unwrap_or(defaults.cycle_tol),
        certify_eps: o.certify_eps.unwrap_or(defaults.certify_eps),
        inner: InnerConfig {
            epsilon: i.epsilon.unwrap_or(inner_defaults.epsilon),
            max_iterations: i.max_iterations.unwrap_or(inner_defaults.max_iterations),
            step_size: i.step_size.unwrap_or(inner_defaults.step_size),
            grid_resolution: i.grid_resolution.unwrap_or(inner_defaults.grid_resolution),
            method: i.method.unwrap_or(inner_defaults.method),
            grid_fallback: i.grid_fallback.unwrap_or(inner_defaults.grid_fallback),
        },
    };
    let out = raw.output.unwrap_or_default();
    let output = OutputSpec {
        trace: out.trace,
        certificate: out.certificate,
        summary: out.summary,
        oracle: out.oracle,
        parallel: out.parallel.unwrap_or(false),
    };
    let spec = RunSpec { problem, start, outer, output };
    validate(&spec)?;
    Ok(spec)
}

/// Field-level checks; also resolves the problem to check start dimensions.
pub fn validate(spec: &RunSpec) -> Result<(), CliError> {
    let o = &spec.outer;
    let positive = |field: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(invalid(field, format!("must be positive and finite, got {v}")))
        }
    };
    positive("outer.stop_tol", o.stop_tol)?;
    positive("outer.cycle_tol", o.cycle_tol)?;
    positive("outer.certify_eps", o.certify_eps)?;
    positive("inner.epsilon", o.inner.epsilon)?;
    positive("inner.step_size", o.inner.step_size)?;
    positive("inner.grid_resolution", o.inner.grid_resolution)?;
    if o.max_iterations == 0 {
        return Err(invalid("outer.max_iterations", "must be at least 1"));
    }
    if o.inner.max_iterations == 0 {
        return Err(invalid("inner.max_iterations", "must be at least 1"));
    }
    if o.cycle_window < 2 || o.cycle_window > o.max_iterations {
        return Err(invalid("outer.cycle_window", "must lie in [2, outer.max_iterations]"));
    }
    let problem = resolve_problem(&spec.problem)?;
    let dim = problem.qep.dim();
    let check = |field: &str, x: &[f64]| {
        if x.len() != dim {
            Err(invalid(field, format!("expected {dim} coordinates, found {}", x.len())))
        } else if x.iter().any(|v| !v.is_finite()) {
            Err(invalid(field, "coordinates must be finite"))
        } else {
            Ok(())
        }
    };
    match &spec.start {
        StartSpec::Point(x0) => check("start.x0", x0)?,
        StartSpec::Points(points) => {
            if points.is_empty() {
                return Err(invalid("start.points", "needs at least one point"));
            }
            for p in points {
                check("start.points", p)?;
            }
        }
        StartSpec::Random { count, seed } => {
            if *count == 0 {
                return Err(invalid("start.random", "must be at least 1"));
            }
            if *seed > i64::MAX as u64 {
                return Err(invalid("start.seed", "must fit in a signed 64-bit integer"));
            }
        }
    }
    Ok(())
}

/// Renders a specification as a configuration document; parsing the result
/// gives back the same specification.
pub fn render_config(spec: &RunSpec) -> String {
    let problem = match &spec.problem {
        ProblemSpec::Named(name) => RawProblem { instance: Some(name.clone()), ..RawProblem::default() },
        ProblemSpec::Inline(p) => RawProblem {
            instance: None,
            domain: Some(p.domain.clone()),
            constraint_base: Some(p.constraint_base.clone()),
            constraint_matrix: p.constraint_matrix.clone(),
            constraint_offset: p.constraint_offset.clone(),
            field_matrix: p.field_matrix.clone(),
            field_offset: p.field_offset.clone(),
        },
    };
    let start = match &spec.start {
        StartSpec::Point(x0) => RawStart { x0: Some(x0.clone()), ..RawStart::default() },
        StartSpec::Points(points) => RawStart { points: Some(points.clone()), ..RawStart::default() },
        StartSpec::Random { count, seed } => RawStart { random: Some(*count), seed: Some(*seed), ..RawStart::default() },
    };
    let o = &spec.outer;
    let raw = RawConfig {
        problem,
        start: Some(start),
        outer: Some(RawOuter {
            stop_tol: Some(o.stop_tol),
            max_iterations: Some(o.max_iterations),
            cycle_window: Some(o.cycle_window),
            cycle_tol: Some(o.cycle_tol),
            certify_eps: Some(o.certify_eps),
        }),
        inner: Some(RawInner {
            epsilon: Some(o.inner.epsilon),
            max_iterations: Some(o.inner.max_iterations),
            step_size: Some(o.inner.step_size),
            grid_resolution: Some(o.inner.grid_resolution),
            method: Some(o.inner.method),
            grid_fallback: Some(o.inner.grid_fallback),
        }),
        output: Some(RawOutput {
            trace: spec.output.trace.clone(),
            certificate: spec.output.certificate.clone(),
            summary: spec.output.summary.clone(),
            oracle: spec.output.oracle.clone(),
            parallel: Some(spec.output.parallel),
        }),
    };
    toml::to_string(&raw).expect("configuration values are representable")
}

pub fn load_config(path: &Path) -> Result<RunSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_config(&text)
}

/// A problem ready to run.
#[derive(Clone)]
pub struct ResolvedProblem {
    pub name: String,
    pub qep: Qep,
    pub closed_form: Option<ClosedForm>,
}

impl ResolvedProblem {
    pub fn procedure(&self) -> Procedure<'_> {
        Procedure::new(&self.qep).with_closed_form(self.closed_form.clone())
    }
}

pub fn resolve_problem(problem: &ProblemSpec) -> Result<ResolvedProblem, CliError> {
    match problem {
        ProblemSpec::Named(name) => {
            let inst = instance_by_name(name)?;
            Ok(ResolvedProblem { name: inst.name, qep: inst.qep, closed_form: inst.closed_form })
        }
        ProblemSpec::Inline(p) => Ok(ResolvedProblem { name: "inline".into(), qep: p.build()?, closed_form: None }),
    }
}

fn start_points(spec: &RunSpec, problem: &ResolvedProblem) -> Result<Vec<Vector>, CliError> {
    Ok(match &spec.start {
        StartSpec::Point(x0) => vec![Vector::from_column_slice(x0)],
        StartSpec::Points(points) => points.iter().map(|p| Vector::from_column_slice(p)).collect(),
        StartSpec::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .map(|_| sample_point(problem.qep.domain(), &mut rng))
                .collect::<Result<_, _>>()
                .map_err(|e| invalid("start.random", e.to_string()))?
        }
    })
}

/// One start of a (multi)start run.
#[derive(Debug)]
pub struct StartRun {
    pub index: usize,
    pub x0: Vector,
    pub result: Result<RunResult, AlgorithmError>,
}

impl StartRun {
    pub fn exit_code(&self) -> i32 {
        match &self.result {
            Ok(r) => r.outcome.exit_code(),
            Err(_) => 1,
        }
    }
}

/// Runs every start of `spec` without writing anything. Constants for the
/// contraction report are estimated once ([`SUMMARY_SAMPLE_COUNT`] samples,
/// seed 0) and skipped when sampling degenerates.
pub fn execute(spec: &RunSpec) -> Result<(ResolvedProblem, Vec<StartRun>), CliError> {
    let problem = resolve_problem(&spec.problem)?;
    let starts = start_points(spec, &problem)?;
    let constants = estimate_constants(&problem.qep, SUMMARY_SAMPLE_COUNT, 0).ok();
    let mut procedure = problem.procedure();
    if let Some(c) = constants {
        procedure = procedure.with_constants(c);
    }
    let run_one = |(index, x0): (usize, Vector)| {
        let result = procedure.run(&x0, &spec.outer);
        StartRun { index, x0, result }
    };
    let runs = if spec.output.parallel && starts.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = starts
                .into_iter()
                .enumerate()
                .map(|item| scope.spawn(move || run_one(item)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("start thread panicked")).collect()
        })
    } else {
        starts.into_iter().enumerate().map(run_one).collect()
    };
    Ok((problem, runs))
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Trace as CSV: `iter,x1..xn,z1..zn,gap,residual`, one row per outer step
/// plus a final row holding the last iterate with empty `z`, gap and
/// residual columns. Reals use the shortest round-trip decimal form.
pub fn trace_csv(result_trace: &crate::algorithm::IterateTrace, dim: usize) -> String {
    let mut out = String::from("iter");
    for prefix in ["x", "z"] {
        for k in 1..=dim {
            out.push_str(&format!(",{prefix}{k}"));
        }
    }
    out.push_str(",gap,residual\n");
    let t = result_trace;
    for (i, x) in t.xs.iter().enumerate() {
        out.push_str(&format!("{i},{}", join(x.iter().copied())));
        match t.zs.get(i) {
            Some(z) => out.push_str(&format!(",{},{},{}\n", join(z.iter().copied()), t.gaps[i], t.residuals[i])),
            None => {
                out.push_str(&",".repeat(dim + 2));
                out.push('\n');
            }
        }
    }
    out
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn constants_json(c: &ProblemConstants) -> Value {
    let entry = |k: &crate::problems::Constant| json!({ "value": number(k.value), "provenance": k.provenance });
    json!({
        "L": entry(&c.lipschitz),
        "m": entry(&c.strong_monotonicity),
        "R": entry(&c.quadratic),
        "h_sup": entry(&c.h_sup),
    })
}

/// Machine-readable summary of one start.
pub fn certificate_json(problem: &str, run: &StartRun) -> Value {
    let mut value = json!({
        "problem": problem,
        "start": run.index,
        "x0": run.x0.as_slice(),
    });
    let obj = value.as_object_mut().expect("object literal");
    match &run.result {
        Err(e) => {
            obj.insert("outcome".into(), json!("Error"));
            obj.insert("error".into(), json!(e.to_string()));
        }
        Ok(r) => {
            let (outcome, period) = match r.outcome {
                Outcome::Converged(_) => ("Converged", Value::Null),
                Outcome::Cycling(p) => ("Cycling", json!(p)),
                Outcome::BudgetExhausted => ("BudgetExhausted", Value::Null),
            };
            obj.insert("outcome".into(), json!(outcome));
            obj.insert("period".into(), period);
            obj.insert("iterations".into(), json!(r.trace.zs.len()));
            obj.insert("final_x".into(), json!(r.trace.xs.last().expect("nonempty trace").as_slice()));
            if let Outcome::Converged(c) = &r.outcome {
                obj.insert("ep_residual".into(), number(c.ep_residual));
                obj.insert("projection_gap".into(), number(c.projection_gap));
                obj.insert(
                    "certificate".into(),
                    json!({
                        "x": c.x.as_slice(),
                        "z": c.z.as_slice(),
                        "ep_residual": number(c.ep_residual),
                        "residual_error_bound": number(c.residual_error_bound),
                        "constraint_distance": number(c.constraint_distance),
                        "projection_distance": number(c.projection_distance),
                        "projection_gap": number(c.projection_gap),
                        "in_constraint": c.in_constraint,
                        "residual_ok": c.residual_ok,
                        "projection_ok": c.projection_ok,
                        "valid": c.valid,
                        "eps": c.eps,
                    }),
                );
            }
            if let Some(d) = &r.diagnostics {
                obj.insert(
                    "contraction".into(),
                    json!({
                        "q": number(d.q),
                        "guaranteed": d.guaranteed,
                        "initial_distance": number(d.initial_distance),
                        "constants": constants_json(&d.constants),
                    }),
                );
            }
        }
    }
    value
}

fn format_point(x: &Vector) -> String {
    format!("({})", x.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", "))
}

/// One human-readable line per start.
pub fn summary_line(problem: &str, run: &StartRun) -> String {
    let head = format!("{problem} start {} from {}", run.index, format_point(&run.x0));
    match &run.result {
        Err(e) => format!("{head}: error: {e}"),
        Ok(r) => {
            let steps = r.trace.zs.len();
            match &r.outcome {
                Outcome::Converged(c) => format!(
                    "{head}: Converged at {} after {steps} steps (residual {:e}, projection gap {:e})",
                    format_point(&c.x),
                    c.ep_residual,
                    c.projection_gap
                ),
                other => format!("{head}: {other} after {steps} steps"),
            }
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// `trace.csv` -> `trace.2.csv`
fn per_start_path(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{index}"),
    };
    path.with_file_name(name)
}

/// Runs `spec`, writes the configured outputs and one summary line per start
/// to `out`, and returns the exit status: 0 when every start converged, 2 or
/// 3 for cycling or an exhausted budget, 1 when any start failed.
///
/// With several starts every file is written per start (`trace.0.csv`, ...)
/// and merged by start index: the merged trace gains a leading `start`
/// column and the merged certificate is a JSON array.
pub fn run_command(spec: &RunSpec, out: &mut dyn Write) -> Result<i32, CliError> {
    let (problem, runs) = execute(spec)?;
    let dim = problem.qep.dim();
    let multi = runs.len() > 1;
    let traces: Vec<Option<String>> = runs
        .iter()
        .map(|run| match &run.result {
            Ok(r) => Some(trace_csv(&r.trace, dim)),
            Err(e) => e.trace().map(|t| trace_csv(t, dim)),
        })
        .collect();
    let certificates: Vec<Value> = runs.iter().map(|run| certificate_json(&problem.name, run)).collect();
    let lines: Vec<String> = runs.iter().map(|run| summary_line(&problem.name, run)).collect();

    if let Some(path) = &spec.output.trace {
        if multi {
            let mut merged = String::new();
            for (run, trace) in runs.iter().zip(&traces) {
                let Some(trace) = trace else { continue };
                write_file(&per_start_path(path, run.index), trace)?;
                for (row, line) in trace.lines().enumerate() {
                    if row == 0 {
                        if merged.is_empty() {
                            merged.push_str(&format!("start,{line}\n"));
                        }
                    } else {
                        merged.push_str(&format!("{},{line}\n", run.index));
                    }
                }
            }
            write_file(path, &merged)?;
        } else if let Some(trace) = &traces[0] {
            write_file(path, trace)?;
        }
    }
    if let Some(path) = &spec.output.certificate {
        if multi {
            for (run, cert) in runs.iter().zip(&certificates) {
                write_file(&per_start_path(path, run.index), &(serde_json::to_string_pretty(cert).expect("json") + "\n"))?;
            }
            write_file(path, &(serde_json::to_string_pretty(&certificates).expect("json") + "\n"))?;
        } else {
            write_file(path, &(serde_json::to_string_pretty(&certificates[0]).expect("json") + "\n"))?;
        }
    }
    if let Some(path) = &spec.output.summary {
        write_file(path, &(lines.join("\n") + "\n"))?;
    }
    for line in &lines {
        writeln!(out, "{line}").map_err(|e| io_error(Path::new("<stdout>"), e))?;
    }

    let codes: Vec<i32> = runs.iter().map(StartRun::exit_code).collect();
    Ok(if codes.contains(&1) { 1 } else { codes.into_iter().max().unwrap_or(0) })
}

/// Grid points of `C` passing the fixed-point test, as CSV `x1..xn`.
pub fn oracle_csv(points: &[Vector], dim: usize) -> String {
    let header = (1..=dim).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    let mut out = header + "\n";
    for p in points {
        out.push_str(&join(p.iter().copied()));
        out.push('\n');
    }
    out
}

/// Runs the fixed-point oracle at `resolution` and writes the passing points
/// to `spec.output.oracle` (default `oracle.csv`).
pub fn oracle_command(spec: &RunSpec, resolution: f64, eps: f64, out: &mut dyn Write) -> Result<i32, CliError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(invalid("resolution", "must be positive"));
    }
    let problem = resolve_problem(&spec.problem)?;
    let points = fixed_point_oracle(&problem.procedure(), resolution, eps, &spec.outer.inner)?;
    let path = spec.output.oracle.clone().unwrap_or_else(|| PathBuf::from("oracle.csv"));
    write_file(&path, &oracle_csv(&points, problem.qep.dim()))?;
    writeln!(out, "{}: {} grid points pass at resolution {resolution}; written to {}", problem.name, points.len(), path.display())
        .map_err(|e| io_error(Path::new("<stdout>"), e))?;
    Ok(0)
}

/// Parses a comma-separated vector such as `0.5,0`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid("x0", format!("`{s}` is not a number"))))
        .collect()
}

/// A named-instance specification with default settings.
pub fn instance_spec(name: &str, x0: Vec<f64>) -> RunSpec {
    RunSpec {
        problem: ProblemSpec::Named(name.to_string()),
        start: StartSpec::Point(x0),
        outer: crate::algorithm::OuterConfig::default(),
        output: OutputSpec::default(),
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        invalid("problem", e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_instance() {
        let spec = parse_config("[problem]\ninstance = \"counterexample\"\n[start]\nx0 = [0.5, 0]\n").unwrap();
        assert_eq!(spec.problem, ProblemSpec::Named("counterexample".into()));
        assert_eq!(spec.start, StartSpec::Point(vec![0.5, 0.0]));
        assert_eq!(spec.outer, crate::algorithm::OuterConfig::default());
    }

    #[test]
    fn malformed_vector_reports_line() {
        let err = parse_config("[problem]\ninstance = \"counterexample\"\n[start]\nx0 = [0.5,\n").unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert!(line >= 4, "line {line}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("[problem]\ninstance = \"counterexample\"\ncolour = 1\n[start]\nx0 = [0, 0]\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err:?}");
        let err = parse_config("[problem]\ninstance = \"counterexample\"\n[start]\nx0 = [0, 0]\n[extra]\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { .. }));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let err = parse_config("[problem]\ninstance = \"counterexample\"\n[start]\nx0 = [0, 0, 0]\n").unwrap_err();
        assert!(matches!(err, CliError::Validation { ref field, .. } if field == "start.x0"), "{err:?}");
        let err = parse_config("[problem]\ninstance = \"l2_truncated:4\"\n[start]\nrandom = 2\n[outer]\nstop_tol = -1.0\n")
            .unwrap_err();
        assert!(matches!(err, CliError::Validation { ref field, .. } if field == "outer.stop_tol"));
        let err = parse_config("[problem]\ninstance = \"nope\"\n[start]\nx0 = [0]\n").unwrap_err();
        assert!(matches!(err, CliError::Instance(_)));
    }

    #[test]
    fn l2_instance_with_stop_tol() {
        let spec = parse_config("[problem]\ninstance = \"l2_truncated:4\"\n[start]\nrandom = 5\nseed = 3\n[outer]\nstop_tol = 1e-8\n")
            .unwrap();
        assert_eq!(resolve_problem(&spec.problem).unwrap().qep.dim(), 4);
        assert_eq!(spec.outer.stop_tol, 1e-8);
        assert_eq!(spec.start, StartSpec::Random { count: 5, seed: 3 });
    }

    #[test]
    fn inline_problem_round_trips() {
        let text = r#"
[problem]
domain = { box = { lower = [0.0, 0.0], upper = [1.0, 1.0] } }
constraint_base = { ball = { center = [0.0, 0.0], radius = 0.1 } }
constraint_matrix = [[0.5, 0.0], [0.0, 0.5]]
constraint_offset = [1.5, 0.0]

[start]
points = [[0.0, 0.0], [1.0, 1.0]]

[inner]
method = "extragradient"

[output]
trace = "t.csv"
parallel = true
"#;
        let spec = parse_config(text).unwrap();
        assert!(matches!(spec.problem, ProblemSpec::Inline(_)));
        assert_eq!(spec.outer.inner.method, InnerMethod::Extragradient);
        assert_eq!(parse_config(&render_config(&spec)).unwrap(), spec);
    }

    #[test]
    fn trace_csv_format() {
        let spec = instance_spec("counterexample", vec![0.0, 0.0]);
        let (problem, runs) = execute(&spec).unwrap();
        let csv = trace_csv(&runs[0].result.as_ref().unwrap().trace, problem.qep.dim());
        assert_eq!(csv, "iter,x1,x2,z1,z2,gap,residual\n0,0,0,-0,1,0,0\n1,0,0,,,,\n");
    }

    #[test]
    fn vector_flag_parsing() {
        assert_eq!(parse_vector("0.5,0").unwrap(), vec![0.5, 0.0]);
        assert_eq!(parse_vector("[1, -2]").unwrap(), vec![1.0, -2.0]);
        assert!(parse_vector("1,x").is_err());
    }

    #[test]
    fn per_start_names() {
        assert_eq!(per_start_path(Path::new("out/trace.csv"), 2), PathBuf::from("out/trace.2.csv"));
        assert_eq!(per_start_path(Path::new("cert"), 0), PathBuf::from("cert.0"));
    }
}
