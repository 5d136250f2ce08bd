//! Closed convex sets in Euclidean `R^n`: metric projection, membership and
//! support values.
//!
//! Every set here is closed and convex, so the nearest point is unique and
//! [`ConvexSet::project`] is a plain function. Boxes, balls, segments and the
//! nonnegative part of a centered ball project in closed form; polytopes use an
//! exact active-set solve. Translates reduce to their base, and sums with a
//! ball addend have a closed form too.

mod grid;
mod lp;
mod polytope;

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

pub use grid::{direction_net, grid_cover, sample_point, GRID_DIMENSION_LIMIT};
pub use polytope::{Halfspace, Polytope};

/// Dense coordinate vector, the ambient point type.
pub type Vector = DVector<f64>;

/// Default distance tolerance for geometric predicates.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("the set is empty")]
    InfeasibleSet,
    #[error("support value is unbounded in the requested direction")]
    UnboundedSupport,
    #[error("{method} did not reach tolerance within {budget} iterations")]
    NonConvergence { method: &'static str, budget: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("grid enumeration in dimension {dim} exceeds the limit {limit}")]
    DimensionTooHigh { dim: usize, limit: usize },
}

/// Builds a [`Vector`] from a slice.
pub fn vector(coords: &[f64]) -> Vector {
    DVector::from_column_slice(coords)
}

pub(crate) fn ensure_finite(v: &Vector, what: &'static str) -> Result<(), GeometryError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite(what))
    }
}

fn ensure_dim(expected: usize, v: &Vector) -> Result<(), GeometryError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found: v.len() })
    }
}

/// Variant data of a [`ConvexSet`].
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    Polytope(Polytope),
    Segment { a: Vector, b: Vector },
    /// `{z : z >= 0, |z| <= radius}`.
    OrthantBall { radius: f64 },
    Translate { base: Arc<ConvexSet>, shift: Vector },
    /// `base + addend`, where the addend is a box or a ball.
    MinkowskiSum { base: Arc<ConvexSet>, addend: Arc<ConvexSet> },
}

/// A validated, nonempty, closed convex set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    kind: SetKind,
    dim: usize,
}

/// Nearest point of a set together with the distance to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vector,
    pub distance: f64,
}

impl ConvexSet {
    pub fn new_box(lower: Vector, upper: Vector) -> Result<Self, GeometryError> {
        ensure_finite(&lower, "box lower bound")?;
        ensure_finite(&upper, "box upper bound")?;
        ensure_dim(lower.len(), &upper)?;
        if lower.is_empty() {
            return Err(GeometryError::InvalidSet("dimension must be at least 1".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(GeometryError::InvalidSet("box lower bound exceeds upper bound".into()));
        }
        let dim = lower.len();
        Ok(Self { kind: SetKind::Box { lower, upper }, dim })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new_box(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self, GeometryError> {
        ensure_finite(&center, "ball center")?;
        if center.is_empty() {
            return Err(GeometryError::InvalidSet("dimension must be at least 1".into()));
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(GeometryError::InvalidSet(format!("ball radius {radius} must be finite and nonnegative")));
        }
        let dim = center.len();
        Ok(Self { kind: SetKind::Ball { center, radius }, dim })
    }

    pub fn singleton(point: Vector) -> Result<Self, GeometryError> {
        Self::ball(point, 0.0)
    }

    pub fn segment(a: Vector, b: Vector) -> Result<Self, GeometryError> {
        ensure_finite(&a, "segment endpoint")?;
        ensure_finite(&b, "segment endpoint")?;
        ensure_dim(a.len(), &b)?;
        if a.is_empty() {
            return Err(GeometryError::InvalidSet("dimension must be at least 1".into()));
        }
        let dim = a.len();
        Ok(Self { kind: SetKind::Segment { a, b }, dim })
    }

    pub fn polytope(halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        let poly = Polytope::new(halfspaces)?;
        let dim = poly.dim();
        Ok(Self { kind: SetKind::Polytope(poly), dim })
    }

    pub fn orthant_ball(dim: usize, radius: f64) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidSet("dimension must be at least 1".into()));
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(GeometryError::InvalidSet(format!("radius {radius} must be finite and nonnegative")));
        }
        Ok(Self { kind: SetKind::OrthantBall { radius }, dim })
    }

    pub fn translate(self, shift: Vector) -> Result<Self, GeometryError> {
        ensure_finite(&shift, "translation")?;
        ensure_dim(self.dim, &shift)?;
        let dim = self.dim;
        Ok(Self { kind: SetKind::Translate { base: Arc::new(self), shift }, dim })
    }

    pub fn minkowski_sum(self, addend: ConvexSet) -> Result<Self, GeometryError> {
        if !matches!(addend.kind, SetKind::Box { .. } | SetKind::Ball { .. }) {
            return Err(GeometryError::InvalidSet("Minkowski addend must be a box or a ball".into()));
        }
        if addend.dim != self.dim {
            return Err(GeometryError::DimensionMismatch { expected: self.dim, found: addend.dim });
        }
        let dim = self.dim;
        Ok(Self { kind: SetKind::MinkowskiSum { base: Arc::new(self), addend: Arc::new(addend) }, dim })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nearest point of the set to `x`. `tol` bounds the error of the only
    /// iterative path (sums of a box with a non-ball base).
    pub fn project(&self, x: &Vector, tol: f64) -> Result<Projection, GeometryError> {
        ensure_dim(self.dim, x)?;
        ensure_finite(x, "projected point")?;
        let point = self.project_point(x, tol)?;
        let distance = (x - &point).norm();
        Ok(Projection { point, distance })
    }

    fn project_point(&self, x: &Vector, tol: f64) -> Result<Vector, GeometryError> {
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => x.zip_zip_map(lower, upper, |v, l, u| v.clamp(l, u)),
            SetKind::Ball { center, radius } => project_ball(x, center, *radius),
            SetKind::Polytope(poly) => poly.project(x)?,
            SetKind::Segment { a, b } => {
                let ab = b - a;
                let len2 = ab.norm_squared();
                if len2 == 0.0 {
                    a.clone()
                } else {
                    let t = ((x - a).dot(&ab) / len2).clamp(0.0, 1.0);
                    if t == 1.0 {
                        b.clone()
                    } else {
                        a + ab * t
                    }
                }
            }
            SetKind::OrthantBall { radius } => {
                let positive = x.map(|v| v.max(0.0));
                let norm = positive.norm();
                if norm > *radius {
                    positive * (*radius / norm)
                } else {
                    positive
                }
            }
            SetKind::Translate { base, shift } => base.project_point(&(x - shift), tol)? + shift,
            SetKind::MinkowskiSum { base, addend } => project_sum(base, addend, x, tol)?,
        })
    }

    /// Whether the distance from `x` to the set is at most `tol`.
    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool, GeometryError> {
        Ok(self.project(x, tol.max(1e-15))?.distance <= tol)
    }

    /// `sup { <direction, z> : z in set }`.
    pub fn support(&self, direction: &Vector) -> Result<f64, GeometryError> {
        ensure_dim(self.dim, direction)?;
        ensure_finite(direction, "support direction")?;
        if direction.iter().all(|&d| d == 0.0) {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => direction
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(d, (l, u))| (d * l).max(d * u))
                .sum(),
            SetKind::Ball { center, radius } => center.dot(direction) + radius * direction.norm(),
            SetKind::Polytope(poly) => poly.support(direction)?,
            SetKind::Segment { a, b } => a.dot(direction).max(b.dot(direction)),
            SetKind::OrthantBall { radius } => radius * direction.map(|d| d.max(0.0)).norm(),
            SetKind::Translate { base, shift } => base.support(direction)? + shift.dot(direction),
            SetKind::MinkowskiSum { base, addend } => base.support(direction)? + addend.support(direction)?,
        })
    }

    /// Componentwise bounds `(lower, upper)` from support values along `+-e_k`.
    pub fn bounding_box(&self) -> Result<(Vector, Vector), GeometryError> {
        let mut lower = DVector::zeros(self.dim);
        let mut upper = DVector::zeros(self.dim);
        for k in 0..self.dim {
            let mut e = DVector::zeros(self.dim);
            e[k] = 1.0;
            upper[k] = self.support(&e)?;
            e[k] = -1.0;
            lower[k] = -self.support(&e)?;
        }
        Ok((lower, upper))
    }

    /// The single point of the set, when it has exactly one.
    pub fn as_singleton(&self) -> Option<Vector> {
        match &self.kind {
            SetKind::Box { lower, upper } => (lower == upper).then(|| lower.clone()),
            SetKind::Ball { center, radius } => (*radius == 0.0).then(|| center.clone()),
            SetKind::Segment { a, b } => (a == b).then(|| a.clone()),
            SetKind::OrthantBall { radius } => (*radius == 0.0).then(|| DVector::zeros(self.dim)),
            SetKind::Polytope(_) => {
                let (lo, hi) = self.bounding_box().ok()?;
                (lo == hi).then_some(lo)
            }
            SetKind::Translate { base, shift } => base.as_singleton().map(|p| p + shift),
            SetKind::MinkowskiSum { base, addend } => Some(base.as_singleton()? + addend.as_singleton()?),
        }
    }

    /// Upper bound on `sup { |z| : z in set }`; exact for boxes, balls,
    /// segments, the orthant ball and translated boxes.
    pub fn norm_bound(&self) -> Result<f64, GeometryError> {
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => lower.zip_map(upper, |l, u| l.abs().max(u.abs())).norm(),
            SetKind::Ball { center, radius } => center.norm() + radius,
            SetKind::Segment { a, b } => a.norm().max(b.norm()),
            SetKind::OrthantBall { radius } => *radius,
            SetKind::Polytope(_) => {
                let (lo, hi) = self.bounding_box()?;
                lo.zip_map(&hi, |l, u| l.abs().max(u.abs())).norm()
            }
            SetKind::Translate { base, shift } => match base.kind() {
                SetKind::Box { lower, upper } => (lower + shift).zip_map(&(upper + shift), |l, u| l.abs().max(u.abs())).norm(),
                _ => base.norm_bound()? + shift.norm(),
            },
            SetKind::MinkowskiSum { base, addend } => base.norm_bound()? + addend.norm_bound()?,
        })
    }
}

fn project_ball(x: &Vector, center: &Vector, radius: f64) -> Vector {
    let offset = x - center;
    let norm = offset.norm();
    if norm <= radius {
        x.clone()
    } else {
        center + offset * (radius / norm)
    }
}

fn project_sum(base: &ConvexSet, addend: &ConvexSet, x: &Vector, tol: f64) -> Result<Vector, GeometryError> {
    match (&base.kind, &addend.kind) {
        (_, SetKind::Ball { center, radius }) => project_onto_ball_sum(base, center, *radius, x, tol),
        (SetKind::Ball { center, radius }, _) => project_onto_ball_sum(addend, center, *radius, x, tol),
        (SetKind::Box { lower: l1, upper: u1 }, SetKind::Box { lower: l2, upper: u2 }) => {
            let (lower, upper) = (l1 + l2, u1 + u2);
            Ok(x.zip_zip_map(&lower, &upper, |v, l, u| v.clamp(l, u)))
        }
        _ => {
            // block coordinate descent on min |x - a - b|, a in base, b in addend
            let budget = 10_000;
            let mut b = addend.project_point(&DVector::zeros(x.len()), tol)?;
            let mut a = base.project_point(&(x - &b), tol)?;
            for _ in 0..budget {
                let b_next = addend.project_point(&(x - &a), tol)?;
                let a_next = base.project_point(&(x - &b_next), tol)?;
                let moved = (&a_next - &a).norm() + (&b_next - &b).norm();
                a = a_next;
                b = b_next;
                if moved <= tol * 1e-3 {
                    return Ok(a + b);
                }
            }
            Err(GeometryError::NonConvergence { method: "Minkowski block descent", budget })
        }
    }
}

fn project_onto_ball_sum(set: &ConvexSet, center: &Vector, radius: f64, x: &Vector, tol: f64) -> Result<Vector, GeometryError> {
    let shifted = x - center;
    let p = set.project_point(&shifted, tol)?;
    let offset = &shifted - &p;
    let norm = offset.norm();
    if norm <= radius {
        Ok(x.clone())
    } else {
        Ok(p + center + offset * (radius / norm))
    }
}

/// Dykstra's alternating projections onto the intersection of the sets whose
/// projections are given. Stops once a full sweep moves the iterate by at most
/// `tol`.
pub fn dykstra<F>(projections: &[F], x: &Vector, tol: f64, max_sweeps: usize) -> Result<Vector, GeometryError>
where
    F: Fn(&Vector) -> Vector,
{
    let mut z = x.clone();
    let mut increments = vec![DVector::zeros(x.len()); projections.len()];
    for _ in 0..max_sweeps {
        let start = z.clone();
        for (proj, inc) in projections.iter().zip(increments.iter_mut()) {
            let y = &z + &*inc;
            let next = proj(&y);
            *inc = y - &next;
            z = next;
        }
        if (&z - &start).norm() <= tol {
            return Ok(z);
        }
    }
    Err(GeometryError::NonConvergence { method: "Dykstra alternation", budget: max_sweeps })
}
