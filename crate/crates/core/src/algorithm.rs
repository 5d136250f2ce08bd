//! The projected-solution procedure: `z_i` solves `EP(f, Phi(x_i))`, then
//! `x_{i+1} = P_C(z_i)`, until consecutive iterates coincide.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ep_solver::{ep_residual, solve_ep, EpError, EpSolution, InnerConfig, SolveMethod};
use crate::geometry::{grid_cover, GeometryError, Vector, DEFAULT_TOL};
use crate::problems::{ProblemConstants, ProblemError, Qep, DOMAIN_TOL};

/// Closed-form inner solution map `x -> S(x)`.
pub type ClosedForm = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Largest dimension accepted by [`fixed_point_oracle`].
pub const ORACLE_DIMENSION_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    pub stop_tol: f64,
    pub max_iterations: usize,
    pub cycle_window: usize,
    pub cycle_tol: f64,
    pub certify_eps: f64,
    pub inner: InnerConfig,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            stop_tol: 1e-8,
            max_iterations: 200,
            cycle_window: 12,
            cycle_tol: 1e-7,
            certify_eps: 1e-6,
            inner: InnerConfig::default(),
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let fail = |msg: &str| Err(AlgorithmError::InvalidConfig(msg.into()));
        if !positive(self.stop_tol) {
            return fail("stop_tol must be positive");
        }
        if !positive(self.cycle_tol) {
            return fail("cycle_tol must be positive");
        }
        if !positive(self.certify_eps) {
            return fail("certify_eps must be positive");
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be at least 1");
        }
        if self.cycle_window < 2 || self.cycle_window > self.max_iterations {
            return fail("cycle_window must lie in [2, max_iterations]");
        }
        self.inner.validate().map_err(|e| AlgorithmError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub xs: Vec<Vector>,
    pub zs: Vec<Vector>,
    /// `gaps[i] = |xs[i+1] - xs[i]|`
    pub gaps: Vec<f64>,
    /// Inner residual at each `zs[i]`.
    pub residuals: Vec<f64>,
    pub methods: Vec<SolveMethod>,
}

/// Checks on a candidate pair `(x, z)`: `z` in `Phi(x)`, `z` solves
/// `EP(f, Phi(x))`, and `x = P_C(z)`, each within `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub x: Vector,
    pub z: Vector,
    pub ep_residual: f64,
    /// Discretization error of `ep_residual` (zero when exact).
    pub residual_error_bound: f64,
    pub constraint_distance: f64,
    /// `|x - P_C(z)|`
    pub projection_distance: f64,
    /// `| |x - z| - d(z, C) | + |x - P_C(z)|`
    pub projection_gap: f64,
    pub in_constraint: bool,
    pub residual_ok: bool,
    pub projection_ok: bool,
    pub valid: bool,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Converged(Certificate),
    Cycling(usize),
    BudgetExhausted,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Converged(_) => 0,
            Outcome::Cycling(_) => 2,
            Outcome::BudgetExhausted => 3,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Converged(_) => write!(f, "Converged"),
            Outcome::Cycling(p) => write!(f, "Cycling period {p}"),
            Outcome::BudgetExhausted => write!(f, "BudgetExhausted"),
        }
    }
}

/// `q^i * initial`
pub fn gap_bound(q: f64, i: usize, initial: f64) -> f64 {
    q.powi(i as i32) * initial
}

/// `q^m / (1 - q) * initial`, for `q < 1`.
pub fn cauchy_bound(q: f64, m: usize, initial: f64) -> Option<f64> {
    (q < 1.0).then(|| q.powi(m as i32) / (1.0 - q) * initial)
}

/// Contraction modulus `q = sqrt(2 R L / m)` of the solution map and the gap
/// bounds it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub constants: ProblemConstants,
    pub q: f64,
    /// `q < 1` and every constant exact.
    pub guaranteed: bool,
    /// `|x_0 - z_0|`
    pub initial_distance: f64,
}

impl ContractionReport {
    pub fn predicted_gap_bound(&self, i: usize) -> f64 {
        gap_bound(self.q, i, self.initial_distance)
    }

    pub fn cauchy_bound(&self, m: usize) -> Option<f64> {
        cauchy_bound(self.q, m, self.initial_distance)
    }

    /// Errors unless the report carries a guarantee.
    pub fn ensure_guaranteed(&self) -> Result<(), AlgorithmError> {
        if self.constants.strong_monotonicity.value <= 0.0 {
            return Err(AlgorithmError::NonpositiveModulus);
        }
        if !self.guaranteed {
            return Err(AlgorithmError::NotGuaranteed { q: self.q });
        }
        Ok(())
    }
}

pub fn contraction_certificate(constants: ProblemConstants, x0: &Vector, z0: &Vector) -> ContractionReport {
    let m = constants.strong_monotonicity.value;
    let q = if m > 0.0 {
        (2.0 * constants.quadratic.value * constants.lipschitz.value / m).sqrt()
    } else {
        f64::INFINITY
    };
    let exact = [constants.lipschitz, constants.strong_monotonicity, constants.quadratic]
        .iter()
        .all(|c| c.is_exact());
    ContractionReport { constants, q, guaranteed: q < 1.0 && exact, initial_distance: (x0 - z0).norm() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: IterateTrace,
    pub outcome: Outcome,
    /// Present when the procedure was given problem constants.
    pub diagnostics: Option<ContractionReport>,
}

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("iteration {iteration}: {source}")]
    Inner { iteration: usize, source: EpError, trace: Box<IterateTrace> },
    #[error("iteration {iteration}: stop rule met but certificate invalid")]
    CertificateRejected { iteration: usize, certificate: Box<Certificate>, trace: Box<IterateTrace> },
    #[error("start point: {0}")]
    InvalidStart(String),
    #[error("invalid outer configuration: {0}")]
    InvalidConfig(String),
    #[error("strong monotonicity modulus is not positive")]
    NonpositiveModulus,
    #[error("no contraction guarantee (q = {q})")]
    NotGuaranteed { q: f64 },
    #[error("dimension {dim} exceeds the oracle limit {limit}")]
    DimensionTooHigh { dim: usize, limit: usize },
    #[error(transparent)]
    Solver(#[from] EpError),
}

impl AlgorithmError {
    /// The partial trace, for errors raised mid-run.
    pub fn trace(&self) -> Option<&IterateTrace> {
        match self {
            AlgorithmError::Inner { trace, .. } | AlgorithmError::CertificateRejected { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Smallest period `p >= 2` such that every `k` among the trailing `window`
/// iterates has `|xs[k] - xs[k-p]| <= cycle_tol`. Period 1 is convergence and
/// is never reported.
///
/// The trailing gaps must all exceed both `stop_tol` and `cycle_tol`: a run
/// converging linearly at a rate near 1 otherwise passes the closeness test
/// for `p = 2` while its gaps sit between the two tolerances.
pub fn detect_cycle(trace: &IterateTrace, window: usize, cycle_tol: f64, stop_tol: f64) -> Option<usize> {
    let len = trace.xs.len();
    if window < 2 || len < window || trace.gaps.len() + 1 < window {
        return None;
    }
    let floor = stop_tol.max(cycle_tol);
    if trace.gaps[trace.gaps.len() + 1 - window..].iter().any(|&g| g <= floor) {
        return None;
    }
    (2..=window).find(|&p| {
        len >= window + p && (len - window..len).all(|k| (&trace.xs[k] - &trace.xs[k - p]).norm() <= cycle_tol)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityProfile {
    pub gaps: Vec<f64>,
    /// Largest of the last `min(10, gaps)` gaps.
    pub tail_max: f64,
}

pub fn asymptotic_regularity_profile(trace: &IterateTrace) -> RegularityProfile {
    let tail = trace.gaps.len().min(10);
    let tail_max = trace.gaps[trace.gaps.len() - tail..].iter().copied().fold(0.0, f64::max);
    RegularityProfile { gaps: trace.gaps.clone(), tail_max }
}

/// Checks the projected-solution conditions for the pair `(x, z)`.
pub fn verify_projected_solution(
    qep: &Qep,
    x: &Vector,
    z: &Vector,
    eps: f64,
    cfg: &InnerConfig,
) -> Result<Certificate, EpError> {
    let k = qep.map.eval(x)?;
    let constraint_distance = k.project(z, DEFAULT_TOL)?.distance;
    let residual = ep_residual(&qep.f.bind(x), &k, z, cfg)?;
    let back = qep.domain().project(z, DEFAULT_TOL)?;
    let projection_distance = (x - &back.point).norm();
    let projection_gap = ((x - z).norm() - back.distance).abs() + projection_distance;
    let in_constraint = constraint_distance <= eps;
    let residual_ok = residual.value >= -eps;
    let projection_ok = projection_distance <= eps;
    Ok(Certificate {
        x: x.clone(),
        z: z.clone(),
        ep_residual: residual.value,
        residual_error_bound: residual.error_bound,
        constraint_distance,
        projection_distance,
        projection_gap,
        in_constraint,
        residual_ok,
        projection_ok,
        valid: in_constraint && residual_ok && projection_ok,
        eps,
    })
}

/// A problem together with optional closed-form solution map and constants.
#[derive(Clone)]
pub struct Procedure<'a> {
    qep: &'a Qep,
    closed_form: Option<ClosedForm>,
    constants: Option<ProblemConstants>,
}

impl fmt::Debug for Procedure<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Procedure")
            .field("qep", self.qep)
            .field("closed_form", &self.closed_form.is_some())
            .field("constants", &self.constants)
            .finish()
    }
}

impl<'a> Procedure<'a> {
    pub fn new(qep: &'a Qep) -> Self {
        Self { qep, closed_form: None, constants: None }
    }

    pub fn with_closed_form(mut self, closed_form: Option<ClosedForm>) -> Self {
        self.closed_form = closed_form;
        self
    }

    pub fn with_constants(mut self, constants: ProblemConstants) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn qep(&self) -> &Qep {
        self.qep
    }

    /// An inner solution `z in S(x)`.
    pub fn solution(&self, x: &Vector, cfg: &InnerConfig) -> Result<EpSolution, EpError> {
        let k = self.qep.map.eval(x)?;
        let candidate = self.closed_form.as_ref().map(|s| s(x));
        solve_ep(&self.qep.f.bind(x), &k, cfg, candidate.as_ref())
    }

    /// `T(x) = P_C(z)` for the selected `z in S(x)`; returns `(z, T(x))`.
    pub fn composite(&self, x: &Vector, cfg: &InnerConfig) -> Result<(EpSolution, Vector), EpError> {
        let solution = self.solution(x, cfg)?;
        let next = self.qep.domain().project(&solution.point, DEFAULT_TOL)?.point;
        Ok((solution, next))
    }

    pub fn run(&self, x0: &Vector, cfg: &OuterConfig) -> Result<RunResult, AlgorithmError> {
        cfg.validate()?;
        let domain = self.qep.domain();
        if x0.len() != domain.dim() {
            return Err(AlgorithmError::InvalidStart(format!(
                "dimension {} does not match problem dimension {}",
                x0.len(),
                domain.dim()
            )));
        }
        let distance = domain
            .project(x0, DEFAULT_TOL)
            .map_err(|e| AlgorithmError::Solver(e.into()))?
            .distance;
        if distance > DOMAIN_TOL {
            return Err(AlgorithmError::InvalidStart(format!("distance {distance:e} to the domain")));
        }

        let mut trace = IterateTrace { xs: vec![x0.clone()], ..IterateTrace::default() };
        let mut diagnostics = None;
        for iteration in 0..cfg.max_iterations {
            let x = trace.xs[iteration].clone();
            let (solution, next) = match self.composite(&x, &cfg.inner) {
                Ok(step) => step,
                Err(source) => {
                    return Err(AlgorithmError::Inner { iteration, source, trace: Box::new(trace) });
                }
            };
            if iteration == 0 {
                diagnostics = self.constants.map(|c| contraction_certificate(c, &x, &solution.point));
            }
            let gap = (&next - &x).norm();
            trace.zs.push(solution.point.clone());
            trace.residuals.push(solution.residual);
            trace.methods.push(solution.method);
            trace.gaps.push(gap);
            trace.xs.push(next);

            if gap <= cfg.stop_tol {
                let certificate =
                    match verify_projected_solution(self.qep, &x, &solution.point, cfg.certify_eps, &cfg.inner) {
                        Ok(c) => c,
                        Err(source) => {
                            return Err(AlgorithmError::Inner { iteration, source, trace: Box::new(trace) });
                        }
                    };
                if !certificate.valid {
                    return Err(AlgorithmError::CertificateRejected {
                        iteration,
                        certificate: Box::new(certificate),
                        trace: Box::new(trace),
                    });
                }
                return Ok(RunResult { trace, outcome: Outcome::Converged(certificate), diagnostics });
            }
            if let Some(period) = detect_cycle(&trace, cfg.cycle_window, cfg.cycle_tol, cfg.stop_tol) {
                return Ok(RunResult { trace, outcome: Outcome::Cycling(period), diagnostics });
            }
        }
        Ok(RunResult { trace, outcome: Outcome::BudgetExhausted, diagnostics })
    }
}

/// Runs the procedure from `x0` without constants.
pub fn run_algorithm1(
    qep: &Qep,
    x0: &Vector,
    cfg: &OuterConfig,
    closed_form: Option<ClosedForm>,
) -> Result<RunResult, AlgorithmError> {
    Procedure::new(qep).with_closed_form(closed_form).run(x0, cfg)
}

/// `T(x) = P_C(S(x))` with the inner solver of `cfg`.
pub fn composite_map(qep: &Qep, x: &Vector, cfg: &InnerConfig, closed_form: Option<ClosedForm>) -> Result<Vector, EpError> {
    Ok(Procedure::new(qep).with_closed_form(closed_form).composite(x, cfg)?.1)
}

/// Grid points `x` of `C` with `|T(x) - x| <= eps + resolution`: an outer
/// approximation of the projected-solution set at grid scale.
pub fn fixed_point_oracle(
    procedure: &Procedure<'_>,
    resolution: f64,
    eps: f64,
    cfg: &InnerConfig,
) -> Result<Vec<Vector>, AlgorithmError> {
    let domain = procedure.qep().domain();
    if domain.dim() > ORACLE_DIMENSION_LIMIT {
        return Err(AlgorithmError::DimensionTooHigh { dim: domain.dim(), limit: ORACLE_DIMENSION_LIMIT });
    }
    let grid = grid_cover(domain, resolution).map_err(|e| match e {
        GeometryError::DimensionTooHigh { dim, limit } => AlgorithmError::DimensionTooHigh { dim, limit },
        other => AlgorithmError::Solver(EpError::Problem(ProblemError::Geometry(other))),
    })?;
    let mut fixed = Vec::new();
    for x in grid {
        let (_, image) = procedure.composite(&x, cfg)?;
        if (&image - &x).norm() <= eps + resolution {
            fixed.push(x);
        }
    }
    Ok(fixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{vector, ConvexSet};
    use crate::problems::{Bifunction, Constant, ConstraintMap};

    fn trace_of(xs: Vec<Vector>) -> IterateTrace {
        let gaps = xs.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
        IterateTrace { xs, gaps, ..IterateTrace::default() }
    }

    #[test]
    fn detects_period_two() {
        let a = vector(&[0.5, 0.0]);
        let b = vector(&[-0.5, 0.0]);
        let xs = (0..16).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        assert_eq!(detect_cycle(&trace_of(xs), 12, 1e-7, 1e-8), Some(2));
    }

    #[test]
    fn constant_trace_is_not_a_cycle() {
        let xs = vec![vector(&[1.0, 1.0]); 20];
        assert_eq!(detect_cycle(&trace_of(xs), 12, 1e-7, 1e-8), None);
    }

    #[test]
    fn detects_period_three() {
        let pts = [vector(&[0.0, 0.0]), vector(&[1.0, 0.0]), vector(&[0.0, 1.0])];
        let xs: Vec<Vector> = (0..18).map(|i| pts[i % 3].clone()).collect();
        let trace = trace_of(xs.clone());
        assert_eq!(detect_cycle(&trace, 12, 1e-7, 1e-8), Some(3));
        // definition by enumeration over the trailing window
        let len = xs.len();
        for p in 2..3 {
            assert!((len - 12..len).any(|k| (&xs[k] - &xs[k - p]).norm() > 1e-7));
        }
    }

    #[test]
    fn slow_linear_convergence_is_not_a_cycle() {
        let xs: Vec<Vector> = (0..400).map(|i| vector(&[0.9f64.powi(i), 0.0])).collect();
        for end in 12..=xs.len() {
            assert_eq!(detect_cycle(&trace_of(xs[..end].to_vec()), 12, 1e-7, 1e-8), None, "prefix {end}");
        }
    }

    #[test]
    fn short_trace_has_no_cycle() {
        let a = vector(&[0.5, 0.0]);
        let b = vector(&[-0.5, 0.0]);
        let xs = (0..13).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        assert_eq!(detect_cycle(&trace_of(xs), 12, 1e-7, 1e-8), None);
    }

    #[test]
    fn contraction_arithmetic() {
        let constants = ProblemConstants {
            lipschitz: Constant::exact(0.2),
            strong_monotonicity: Constant::exact(1.0),
            quadratic: Constant::exact(1.0),
            h_sup: Constant::exact(1.0),
        };
        let x0 = vector(&[0.0, 0.0]);
        let report = contraction_certificate(constants, &x0, &vector(&[2.0, 0.0]));
        assert!((report.q - 0.4f64.sqrt()).abs() < 1e-15);
        assert!(report.guaranteed);
        assert!(report.ensure_guaranteed().is_ok());

        let degenerate = ProblemConstants { strong_monotonicity: Constant::exact(0.0), ..constants };
        let report = contraction_certificate(degenerate, &x0, &x0);
        assert_eq!(report.q, f64::INFINITY);
        assert!(!report.guaranteed);
        assert!(matches!(report.ensure_guaranteed(), Err(AlgorithmError::NonpositiveModulus)));

        let sampled = ProblemConstants { quadratic: Constant::sampled(1.0), ..constants };
        assert!(!contraction_certificate(sampled, &x0, &x0).guaranteed);

        assert_eq!(cauchy_bound(0.5, 3, 2.0), Some(0.5));
        assert_eq!(cauchy_bound(1.5, 3, 2.0), None);
    }

    fn shrink_problem() -> Qep {
        // Phi(x) = {x/2 + (0.5, 0)} on [0,1]^2: the iteration halves the distance to (1, 0)
        let map = ConstraintMap::new(ConvexSet::cube(2, 0.0, 1.0).unwrap(), |x| {
            Ok(ConvexSet::singleton(x * 0.5 + vector(&[0.5, 0.0]))?)
        });
        Qep::new(Bifunction::vi_identity(2), map).unwrap()
    }

    #[test]
    fn run_converges_with_certificate() {
        let qep = shrink_problem();
        let result = run_algorithm1(&qep, &vector(&[0.0, 1.0]), &OuterConfig::default(), None).unwrap();
        let Outcome::Converged(cert) = &result.outcome else { panic!("{:?}", result.outcome) };
        assert!(cert.valid);
        assert!((&cert.x - vector(&[1.0, 0.0])).norm() < 1e-7);
        assert_eq!(result.trace.xs.len(), result.trace.zs.len() + 1);
        assert!(*result.trace.gaps.last().unwrap() <= 1e-8);
        let profile = asymptotic_regularity_profile(&result.trace);
        assert!(profile.tail_max < 1e-4);
    }

    #[test]
    fn budget_exhaustion() {
        let qep = shrink_problem();
        let cfg = OuterConfig { max_iterations: 3, cycle_window: 2, ..OuterConfig::default() };
        let result = run_algorithm1(&qep, &vector(&[0.0, 1.0]), &cfg, None).unwrap();
        assert_eq!(result.outcome, Outcome::BudgetExhausted);
        assert_eq!(result.trace.xs.len(), 4);
    }

    #[test]
    fn start_outside_domain() {
        let qep = shrink_problem();
        let err = run_algorithm1(&qep, &vector(&[2.0, 0.0]), &OuterConfig::default(), None).unwrap_err();
        assert!(matches!(err, AlgorithmError::InvalidStart(_)));
    }

    #[test]
    fn inner_failure_keeps_partial_trace() {
        let qep = shrink_problem();
        let cfg = OuterConfig {
            inner: InnerConfig { method: crate::ep_solver::InnerMethod::ClosedForm, ..InnerConfig::default() },
            ..OuterConfig::default()
        };
        let err = run_algorithm1(&qep, &vector(&[0.0, 1.0]), &cfg, None).unwrap_err();
        assert!(matches!(err, AlgorithmError::Inner { iteration: 0, .. }));
        assert_eq!(err.trace().unwrap().xs.len(), 1);
    }

    #[test]
    fn invalid_config() {
        let cfg = OuterConfig { cycle_window: 1, ..OuterConfig::default() };
        assert!(matches!(cfg.validate(), Err(AlgorithmError::InvalidConfig(_))));
    }
}
