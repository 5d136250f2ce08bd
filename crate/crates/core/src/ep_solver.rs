//! Inner equilibrium problems `EP(f, K)` on a compact convex `K`: find
//! `z in K` with `f(z, y) >= 0` for all `y in K`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{grid_cover, sample_point, ConvexSet, GeometryError, Vector, DEFAULT_TOL};
use crate::problems::{Bifunction, BifunctionForm, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("no inner method applies to this bifunction")]
    NoMethodApplicable,
    #[error("{method:?} stopped after {iterations} iterations with residual {residual:e}")]
    InnerBudgetExceeded { method: SolveMethod, iterations: usize, residual: f64 },
    #[error("constraint set is empty")]
    EmptyConstraint,
    #[error("dimension {dim} exceeds the grid limit {limit}")]
    DimensionTooHigh { dim: usize, limit: usize },
    #[error("invalid inner configuration: {0}")]
    InvalidConfig(String),
}

impl From<GeometryError> for EpError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::InfeasibleSet => EpError::EmptyConstraint,
            GeometryError::DimensionTooHigh { dim, limit } => EpError::DimensionTooHigh { dim, limit },
            other => EpError::Problem(ProblemError::Geometry(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Closed form if supplied, else extragradient for affine forms, else grid.
    Auto,
    ClosedForm,
    Extragradient,
    GridOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Extragradient,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub step_size: f64,
    pub grid_resolution: f64,
    pub method: InnerMethod,
    /// Allow the grid oracle under `Auto` when no faster method applies.
    pub grid_fallback: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            max_iterations: 100_000,
            step_size: 0.5,
            grid_resolution: 0.01,
            method: InnerMethod::Auto,
            grid_fallback: true,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<(), EpError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.epsilon) {
            return Err(EpError::InvalidConfig("epsilon must be positive".into()));
        }
        if !positive(self.step_size) {
            return Err(EpError::InvalidConfig("step_size must be positive".into()));
        }
        if !positive(self.grid_resolution) {
            return Err(EpError::InvalidConfig("grid_resolution must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(EpError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpSolution {
    pub point: Vector,
    /// `inf { f(point, y) : y in K }`; negative values measure the violation.
    pub residual: f64,
    pub method: SolveMethod,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    /// Zero when computed from support values, else `resolution * h(z)`.
    pub error_bound: f64,
}

impl Residual {
    pub fn is_exact(&self) -> bool {
        self.error_bound == 0.0
    }
}

/// `inf <c, y - z>` over `K`.
fn affine_residual(c: &Vector, k: &ConvexSet, z: &Vector) -> Result<f64, EpError> {
    Ok(-k.support(&-c)? - c.dot(z))
}

/// `inf { f(z, y) : y in K }`.
///
/// Exact whenever `f(z, ·)` is affine (VI forms, coordinate differences,
/// singleton-valued operators). Otherwise the minimum over the grid cover of
/// `K` at `cfg.grid_resolution`, with error bound `resolution * h(z)`; `h(z)`
/// comes from the bifunction form, or for custom forms from the largest slope
/// seen on the grid.
pub fn ep_residual(f: &Bifunction, k: &ConvexSet, z: &Vector, cfg: &InnerConfig) -> Result<Residual, EpError> {
    if let Some(c) = f.affine_field(z)? {
        return Ok(Residual { value: affine_residual(&c, k, z)?, error_bound: 0.0 });
    }
    let grid = grid_cover(k, cfg.grid_resolution)?;
    let partial = f.partial(z)?;
    let values = grid.iter().map(|y| partial.eval(y)).collect::<Result<Vec<_>, _>>()?;
    let (arg, value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    let h = match f.lipschitz_in_y(z)? {
        Some(h) => h,
        None => grid
            .iter()
            .zip(&values)
            .filter_map(|(y, v)| {
                let d = (y - &grid[arg]).norm();
                (d > 0.0).then(|| (v - value).abs() / d)
            })
            .fold(0.0, f64::max),
    };
    Ok(Residual { value, error_bound: cfg.grid_resolution * h })
}

/// Solves `EP(f, K)`. `closed_form` is a candidate solution supplied by the
/// instance (the value `S(x)` at the current outer point).
///
/// Under [`InnerMethod::Auto`] the order is closed form, extragradient for
/// affine forms, then the grid oracle when `grid_fallback` is set. The
/// result's residual is at least `-epsilon`; grid results are accepted
/// within `epsilon` plus their discretization error.
pub fn solve_ep(
    f: &Bifunction,
    k: &ConvexSet,
    cfg: &InnerConfig,
    closed_form: Option<&Vector>,
) -> Result<EpSolution, EpError> {
    cfg.validate()?;
    let extragradient_applies = matches!(f.form(), BifunctionForm::Vi { .. } | BifunctionForm::CoordinateDifference(_));
    let method = match cfg.method {
        InnerMethod::Auto if closed_form.is_some() => SolveMethod::ClosedForm,
        InnerMethod::Auto if extragradient_applies => SolveMethod::Extragradient,
        InnerMethod::Auto if cfg.grid_fallback => SolveMethod::GridOracle,
        InnerMethod::Auto => return Err(EpError::NoMethodApplicable),
        InnerMethod::ClosedForm if closed_form.is_some() => SolveMethod::ClosedForm,
        InnerMethod::Extragradient if extragradient_applies => SolveMethod::Extragradient,
        InnerMethod::GridOracle => SolveMethod::GridOracle,
        _ => return Err(EpError::NoMethodApplicable),
    };
    match method {
        SolveMethod::ClosedForm => {
            let z = closed_form.expect("checked above").clone();
            let residual = ep_residual(f, k, &z, cfg)?;
            let outside = k.project(&z, DEFAULT_TOL)?.distance;
            if outside > cfg.epsilon || residual.value < -(cfg.epsilon + residual.error_bound) {
                return Err(EpError::InnerBudgetExceeded {
                    method,
                    iterations: 0,
                    residual: residual.value.min(-outside),
                });
            }
            Ok(EpSolution { point: z, residual: residual.value, method, inner_iterations: 0 })
        }
        SolveMethod::Extragradient => {
            let field = |y: &Vector| -> Result<Vector, EpError> { Ok(f.affine_field(y)?.expect("affine form")) };
            solve_vi_extragradient_fallible(&field, k, cfg)
        }
        SolveMethod::GridOracle => {
            let solution = grid_ep_oracle(f, k, cfg.grid_resolution)?;
            let slack = cfg.grid_resolution * f.lipschitz_in_y(&solution.point)?.unwrap_or(0.0);
            if solution.residual < -(cfg.epsilon + slack) {
                return Err(EpError::InnerBudgetExceeded {
                    method,
                    iterations: solution.inner_iterations,
                    residual: solution.residual,
                });
            }
            Ok(solution)
        }
    }
}

/// Korpelevich extragradient for the variational inequality
/// `<F(z), y - z> >= 0` for all `y in K`.
///
/// `y_k = P(z_k - t F(z_k))`, `z_{k+1} = P(z_k - t F(y_k))` from
/// `z_0 = P(0)`, with `t = min(step_size, 0.9 / L_F)` and `L_F` a sampled
/// Lipschitz estimate of `F` on `K`. Stops once `|z_{k+1} - z_k| <= eps/10`
/// and the exact residual is at least `-eps`.
pub fn solve_vi_extragradient<F>(field: F, k: &ConvexSet, cfg: &InnerConfig) -> Result<EpSolution, EpError>
where
    F: Fn(&Vector) -> Vector,
{
    cfg.validate()?;
    solve_vi_extragradient_fallible(&|y: &Vector| Ok(field(y)), k, cfg)
}

fn field_lipschitz<F>(field: &F, k: &ConvexSet) -> Result<f64, EpError>
where
    F: Fn(&Vector) -> Result<Vector, EpError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0xe6);
    let mut samples = Vec::with_capacity(16);
    for _ in 0..16 {
        let p = sample_point(k, &mut rng)?;
        let value = field(&p)?;
        samples.push((p, value));
    }
    let mut lipschitz: f64 = 0.0;
    for (i, (a, fa)) in samples.iter().enumerate() {
        for (b, fb) in &samples[i + 1..] {
            let d = (a - b).norm();
            if d > 0.0 {
                lipschitz = lipschitz.max((fa - fb).norm() / d);
            }
        }
    }
    Ok(lipschitz)
}

fn solve_vi_extragradient_fallible<F>(field: &F, k: &ConvexSet, cfg: &InnerConfig) -> Result<EpSolution, EpError>
where
    F: Fn(&Vector) -> Result<Vector, EpError>,
{
    let lipschitz = field_lipschitz(field, k)?;
    let step = if lipschitz > 0.0 { cfg.step_size.min(0.9 / lipschitz) } else { cfg.step_size };
    let project = |v: Vector| -> Result<Vector, EpError> { Ok(k.project(&v, DEFAULT_TOL)?.point) };
    let mut z = project(Vector::zeros(k.dim()))?;
    let mut residual = f64::NEG_INFINITY;
    for iteration in 1..=cfg.max_iterations {
        let fz = field(&z)?;
        let y = project(&z - &fz * step)?;
        let next = project(&z - field(&y)? * step)?;
        let moved = (&next - &z).norm();
        z = next;
        if moved <= cfg.epsilon / 10.0 {
            residual = affine_residual(&field(&z)?, k, &z)?;
            if residual >= -cfg.epsilon {
                return Ok(EpSolution { point: z, residual, method: SolveMethod::Extragradient, inner_iterations: iteration });
            }
        }
    }
    if residual == f64::NEG_INFINITY {
        residual = affine_residual(&field(&z)?, k, &z)?;
    }
    Err(EpError::InnerBudgetExceeded { method: SolveMethod::Extragradient, iterations: cfg.max_iterations, residual })
}

/// Brute-force solver: over the grid cover of `K`, the point maximizing the
/// grid minimum of `f(z, ·)`. Ties go to the first point in lexicographic
/// order. The reported residual is the grid minimum at the returned point.
pub fn grid_ep_oracle(f: &Bifunction, k: &ConvexSet, resolution: f64) -> Result<EpSolution, EpError> {
    let grid = grid_cover(k, resolution)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_index = 0;
    let mut witness = 0;
    'points: for (i, z) in grid.iter().enumerate() {
        let partial = f.partial(z)?;
        // the last minimizer usually rules a candidate out at once
        let first = partial.eval(&grid[witness])?;
        if first <= best {
            continue;
        }
        let mut min = first;
        let mut arg = witness;
        for (j, y) in grid.iter().enumerate() {
            let v = partial.eval(y)?;
            if v < min {
                min = v;
                arg = j;
                if min <= best {
                    witness = arg;
                    continue 'points;
                }
            }
        }
        witness = arg;
        best = min;
        best_index = i;
    }
    Ok(EpSolution {
        point: grid[best_index].clone(),
        residual: best,
        method: SolveMethod::GridOracle,
        inner_iterations: grid.len(),
    })
}
