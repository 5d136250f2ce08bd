//! Bifunctions, set-valued operators and parametric constraint maps.
//!
//! A quasi equilibrium problem is a bifunction `f` together with a constraint
//! map `x -> Phi(x)` defined on a domain `C`. `Phi(x)` may miss `C` entirely
//! (non-self maps); the solution procedure projects back onto `C`.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{direction_net, sample_point, ConvexSet, GeometryError, Vector};

/// Membership slack used when checking that a point lies in the domain `C`.
pub const DOMAIN_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point lies outside the domain (distance {distance:e})")]
    OutsideDomain { distance: f64 },
    #[error("map is undefined at this point: {0}")]
    UndefinedAtPoint(String),
    #[error("bifunction is nonzero on the diagonal: f(x, x) = {value:e}")]
    DiagonalNonzero { value: f64 },
    #[error("bifunction depends on the outer point; bind it first")]
    UnboundOuterPoint,
    #[error("all sampled pairs coincide")]
    DegenerateSamples,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Single-valued map `R^n -> R^n`.
pub type VectorField = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Map from points to convex sets.
pub type SetMapFn = Arc<dyn Fn(&Vector) -> Result<ConvexSet, ProblemError> + Send + Sync>;

type ScalarFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
type BindFn = Arc<dyn Fn(&Vector) -> Bifunction + Send + Sync>;

fn ensure_dim(expected: usize, v: &Vector) -> Result<(), ProblemError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch { expected, found: v.len() })
    }
}

/// Set-valued operator `T` whose values are bounded convex sets.
#[derive(Clone)]
pub struct SetValuedOperator {
    dim: usize,
    eval: SetMapFn,
}

impl SetValuedOperator {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&Vector) -> Result<ConvexSet, ProblemError> + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(eval) }
    }

    /// `T(x) = {g(x)}`.
    pub fn single_valued<F>(dim: usize, g: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self::new(dim, move |x| Ok(ConvexSet::singleton(g(x))?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Vector) -> Result<ConvexSet, ProblemError> {
        ensure_dim(self.dim, x)?;
        let set = (self.eval)(x)?;
        if set.dim() != self.dim {
            return Err(ProblemError::DimensionMismatch { expected: self.dim, found: set.dim() });
        }
        Ok(set)
    }
}

impl fmt::Debug for SetValuedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetValuedOperator").field("dim", &self.dim).finish_non_exhaustive()
    }
}

/// `G_T(x, y) = sup { <v, y - x> : v in T(x) }`, exact through the support
/// value of `T(x)`.
pub fn gt_eval(op: &SetValuedOperator, x: &Vector, y: &Vector) -> Result<f64, ProblemError> {
    ensure_dim(op.dim, y)?;
    Ok(op.eval(x)?.support(&(y - x))?)
}

#[derive(Clone)]
pub enum BifunctionForm {
    /// `f(x, y) = <F(x), y - x>`; `identity` marks `F = id`.
    Vi { field: VectorField, identity: bool },
    /// Representative bifunction `G_T` of a set-valued operator.
    OperatorSup(SetValuedOperator),
    /// `f(x, y) = y_k - x_k` (zero-based `k`).
    CoordinateDifference(usize),
    Custom(ScalarFn),
    /// A bifunction chosen per outer iterate; resolve with [`Bifunction::bind`].
    PerOuter(BindFn),
}

/// Evaluable bifunction `f(x, y)` on `R^n x R^n`.
#[derive(Clone)]
pub struct Bifunction {
    form: BifunctionForm,
    dim: usize,
}

impl fmt::Debug for Bifunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match &self.form {
            BifunctionForm::Vi { identity: true, .. } => "Vi(identity)".to_string(),
            BifunctionForm::Vi { .. } => "Vi".to_string(),
            BifunctionForm::OperatorSup(_) => "OperatorSup".to_string(),
            BifunctionForm::CoordinateDifference(k) => format!("CoordinateDifference({k})"),
            BifunctionForm::Custom(_) => "Custom".to_string(),
            BifunctionForm::PerOuter(_) => "PerOuter".to_string(),
        };
        f.debug_struct("Bifunction").field("form", &form).field("dim", &self.dim).finish()
    }
}

/// `f(x, ·)` with `x` fixed, in the cheapest evaluable shape.
pub(crate) enum Partial {
    /// `y -> <coeff, y> + constant`
    Affine { coeff: Vector, constant: f64 },
    /// `y -> support(T(x), y - x)`
    Support { set: ConvexSet, anchor: Vector },
    General { f: ScalarFn, anchor: Vector },
}

impl Partial {
    pub(crate) fn eval(&self, y: &Vector) -> Result<f64, ProblemError> {
        Ok(match self {
            Partial::Affine { coeff, constant } => coeff.dot(y) + constant,
            Partial::Support { set, anchor } => set.support(&(y - anchor))?,
            Partial::General { f, anchor } => f(anchor, y),
        })
    }
}

impl Bifunction {
    pub fn vi<F>(dim: usize, field: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self { form: BifunctionForm::Vi { field: Arc::new(field), identity: false }, dim }
    }

    /// `f(x, y) = <x, y - x>`, the representative bifunction of `T(x) = {x}`.
    pub fn vi_identity(dim: usize) -> Self {
        Self { form: BifunctionForm::Vi { field: Arc::new(|x: &Vector| x.clone()), identity: true }, dim }
    }

    pub fn operator_sup(op: SetValuedOperator) -> Self {
        let dim = op.dim();
        Self { form: BifunctionForm::OperatorSup(op), dim }
    }

    /// `f(x, y) = y_k - x_k` with zero-based `index`.
    pub fn coordinate_difference(dim: usize, index: usize) -> Result<Self, ProblemError> {
        if index >= dim {
            return Err(ProblemError::InvalidArgument(format!("coordinate {index} out of range for dimension {dim}")));
        }
        Ok(Self { form: BifunctionForm::CoordinateDifference(index), dim })
    }

    pub fn custom<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
    {
        Self { form: BifunctionForm::Custom(Arc::new(f)), dim }
    }

    pub fn per_outer<F>(dim: usize, bind: F) -> Self
    where
        F: Fn(&Vector) -> Bifunction + Send + Sync + 'static,
    {
        Self { form: BifunctionForm::PerOuter(Arc::new(bind)), dim }
    }

    pub fn form(&self) -> &BifunctionForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Resolves a [`BifunctionForm::PerOuter`] bifunction at the outer point;
    /// other forms are returned unchanged.
    pub fn bind(&self, outer: &Vector) -> Bifunction {
        match &self.form {
            BifunctionForm::PerOuter(bind) => bind(outer),
            _ => self.clone(),
        }
    }

    pub fn eval(&self, x: &Vector, y: &Vector) -> Result<f64, ProblemError> {
        ensure_dim(self.dim, x)?;
        ensure_dim(self.dim, y)?;
        match &self.form {
            BifunctionForm::Vi { field, .. } => Ok(field(x).dot(&(y - x))),
            BifunctionForm::OperatorSup(op) => gt_eval(op, x, y),
            BifunctionForm::CoordinateDifference(k) => Ok(y[*k] - x[*k]),
            BifunctionForm::Custom(f) => Ok(f(x, y)),
            BifunctionForm::PerOuter(_) => Err(ProblemError::UnboundOuterPoint),
        }
    }

    /// The vector `F(x)` when `f(x, ·) = <F(x), · - x>` is affine.
    pub fn affine_field(&self, x: &Vector) -> Result<Option<Vector>, ProblemError> {
        ensure_dim(self.dim, x)?;
        Ok(match &self.form {
            BifunctionForm::Vi { field, .. } => Some(field(x)),
            BifunctionForm::CoordinateDifference(k) => {
                let mut e = Vector::zeros(self.dim);
                e[*k] = 1.0;
                Some(e)
            }
            BifunctionForm::OperatorSup(op) => op.eval(x)?.as_singleton(),
            BifunctionForm::Custom(_) => None,
            BifunctionForm::PerOuter(_) => return Err(ProblemError::UnboundOuterPoint),
        })
    }

    /// A bound `h(x)` with `|f(x,y) - f(x,y')| <= h(x) |y - y'|`, when the form
    /// provides one: `|F(x)|` for affine forms, `sup |v|` over `T(x)` for `G_T`.
    pub fn lipschitz_in_y(&self, x: &Vector) -> Result<Option<f64>, ProblemError> {
        Ok(match &self.form {
            BifunctionForm::OperatorSup(op) => Some(op.eval(x)?.norm_bound()?),
            BifunctionForm::Custom(_) => None,
            _ => self.affine_field(x)?.map(|g| g.norm()),
        })
    }

    pub(crate) fn partial(&self, x: &Vector) -> Result<Partial, ProblemError> {
        if let Some(coeff) = self.affine_field(x)? {
            let constant = -coeff.dot(x);
            return Ok(Partial::Affine { coeff, constant });
        }
        Ok(match &self.form {
            BifunctionForm::OperatorSup(op) => Partial::Support { set: op.eval(x)?, anchor: x.clone() },
            BifunctionForm::Custom(f) => Partial::General { f: f.clone(), anchor: x.clone() },
            _ => unreachable!("affine forms handled above"),
        })
    }

    /// Checks `f(x, x) = 0` on the given points.
    pub fn check_diagonal(&self, points: &[Vector], tol: f64) -> Result<(), ProblemError> {
        for p in points {
            let value = self.bind(p).eval(p, p)?;
            if value.abs() > tol {
                return Err(ProblemError::DiagonalNonzero { value });
            }
        }
        Ok(())
    }
}

/// Parametric constraint map `x -> Phi(x)` on the domain `C`.
#[derive(Clone)]
pub struct ConstraintMap {
    domain: ConvexSet,
    eval: SetMapFn,
}

impl fmt::Debug for ConstraintMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintMap").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl ConstraintMap {
    pub fn new<F>(domain: ConvexSet, eval: F) -> Self
    where
        F: Fn(&Vector) -> Result<ConvexSet, ProblemError> + Send + Sync + 'static,
    {
        Self { domain, eval: Arc::new(eval) }
    }

    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `Phi(x)` for `x` in the domain (within [`DOMAIN_TOL`]).
    pub fn eval(&self, x: &Vector) -> Result<ConvexSet, ProblemError> {
        ensure_dim(self.dim(), x)?;
        let distance = self.domain.project(x, crate::geometry::DEFAULT_TOL)?.distance;
        if distance > DOMAIN_TOL {
            return Err(ProblemError::OutsideDomain { distance });
        }
        let set = (self.eval)(x)?;
        if set.dim() != self.dim() {
            return Err(ProblemError::DimensionMismatch { expected: self.dim(), found: set.dim() });
        }
        Ok(set)
    }
}

/// A quasi equilibrium problem `QEP(f, Phi)` with domain `C = map.domain()`.
#[derive(Debug, Clone)]
pub struct Qep {
    pub f: Bifunction,
    pub map: ConstraintMap,
}

impl Qep {
    /// Validates dimensions and checks `f(x, x) = 0` on a few deterministic
    /// samples of `C` and of the sampled `Phi(x)`.
    pub fn new(f: Bifunction, map: ConstraintMap) -> Result<Self, ProblemError> {
        if f.dim() != map.dim() {
            return Err(ProblemError::DimensionMismatch { expected: map.dim(), found: f.dim() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..8 {
            let x = sample_point(map.domain(), &mut rng)?;
            let set = map.eval(&x)?;
            let z = sample_point(&set, &mut rng)?;
            let bound = f.bind(&x);
            for p in [&x, &z] {
                let value = bound.eval(p, p)?;
                if value.abs() > 1e-9 {
                    return Err(ProblemError::DiagonalNonzero { value });
                }
            }
        }
        Ok(Self { f, map })
    }

    pub fn domain(&self) -> &ConvexSet {
        self.map.domain()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

impl Constant {
    pub fn exact(value: f64) -> Self {
        Self { value, provenance: Provenance::Exact }
    }

    pub fn sampled(value: f64) -> Self {
        Self { value, provenance: Provenance::Sampled }
    }

    pub fn is_exact(&self) -> bool {
        self.provenance == Provenance::Exact
    }
}

/// Moduli behind the contraction guarantee for the solution map:
/// `Phi(x) ⊆ Phi(y) + L|x-y|B`, `f(x,y)+f(y,x) <= -m|x-y|^2`,
/// `|f(x,y)-f(x,y')| <= R|y-y'|^2`, and the Lipschitz-in-`y` modulus `h`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProblemConstants {
    pub lipschitz: Constant,
    pub strong_monotonicity: Constant,
    pub quadratic: Constant,
    pub h_sup: Constant,
}

/// Estimates [`ProblemConstants`] from `sample_count` deterministic samples.
///
/// Sampling: a ChaCha8 stream seeded with `seed` (via `seed_from_u64`) draws,
/// for each `i`, a point `x_i` of `C`, then two points `u_i, v_i` of
/// `Phi(x_i)`. A point of a set is drawn uniformly in its bounding box and
/// projected onto the set. Larger sample counts extend the same stream, so
/// sample sets are nested.
///
/// `L` compares support values of `Phi(x_i)` and `Phi(x_j)` over a net of
/// `64 n` directions; `m`, `R` and `h` are extremal ratios over pairs and
/// triples of the `u, v` pool. `L`, `R` and `h` can only grow with more
/// samples; `m` can only shrink. Only `m = 1` for `F = id` is reported exact.
pub fn estimate_constants(qep: &Qep, sample_count: usize, seed: u64) -> Result<ProblemConstants, ProblemError> {
    if sample_count < 2 {
        return Err(ProblemError::InvalidArgument("sample_count must be at least 2".into()));
    }
    let dim = qep.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outer = Vec::with_capacity(sample_count);
    let mut sets = Vec::with_capacity(sample_count);
    let mut pool = Vec::with_capacity(2 * sample_count);
    for i in 0..sample_count {
        let x = sample_point(qep.domain(), &mut rng)?;
        let set = qep.map.eval(&x)?;
        pool.push((sample_point(&set, &mut rng)?, i));
        pool.push((sample_point(&set, &mut rng)?, i));
        outer.push(x);
        sets.push(set);
    }

    let directions = direction_net(dim, 64 * dim);
    let supports: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| directions.iter().map(|d| s.support(d)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut lipschitz: f64 = 0.0;
    for i in 0..sample_count {
        for j in (i + 1)..sample_count {
            let dx = (&outer[i] - &outer[j]).norm();
            if dx == 0.0 {
                continue;
            }
            let (mut gap_ij, mut gap_ji) = (0.0_f64, 0.0_f64);
            for (a, b) in supports[i].iter().zip(&supports[j]) {
                gap_ij = gap_ij.max(a - b);
                gap_ji = gap_ji.max(b - a);
            }
            lipschitz = lipschitz.max(gap_ij.max(gap_ji) / dx);
        }
    }

    let bound: Vec<Bifunction> = outer.iter().map(|x| qep.f.bind(x)).collect();
    // values[a][b] = f(p_a, p_b) with f bound at the owner of p_a
    let values: Vec<Vec<f64>> = pool
        .iter()
        .map(|(pa, owner)| pool.iter().map(|(pb, _)| bound[*owner].eval(pa, pb)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;

    let mut any_pair = false;
    let mut worst_monotone = f64::NEG_INFINITY;
    let mut quadratic: f64 = 0.0;
    let mut h_sup: f64 = 0.0;
    for b in 0..pool.len() {
        for c in (b + 1)..pool.len() {
            let dist = (&pool[b].0 - &pool[c].0).norm();
            if dist == 0.0 {
                continue;
            }
            any_pair = true;
            worst_monotone = worst_monotone.max((values[b][c] + values[c][b]) / (dist * dist));
            for row in &values {
                let diff = (row[b] - row[c]).abs();
                quadratic = quadratic.max(diff / (dist * dist));
                h_sup = h_sup.max(diff / dist);
            }
        }
    }
    if !any_pair {
        return Err(ProblemError::DegenerateSamples);
    }

    let strong_monotonicity = match qep.f.form() {
        BifunctionForm::Vi { identity: true, .. } => Constant::exact(1.0),
        _ => Constant::sampled((-worst_monotone).max(0.0)),
    };
    Ok(ProblemConstants {
        lipschitz: Constant::sampled(lipschitz),
        strong_monotonicity,
        quadratic: Constant::sampled(quadratic),
        h_sup: Constant::sampled(h_sup),
    })
}
