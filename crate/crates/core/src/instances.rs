//! Worked examples with known behavior, addressable by name.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::algorithm::{ClosedForm, Procedure};
use crate::geometry::{vector, ConvexSet, Vector};
use crate::problems::{Bifunction, ConstraintMap, ProblemError, Qep};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("unknown instance `{0}`")]
    Unknown(String),
    #[error("invalid modulus {0}: expected 0 < q < 1")]
    InvalidModulus(f64),
    #[error("invalid instance parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    /// Converges to `to` within `steps` outer steps.
    Converged { to: Vector, steps: usize },
    Cycling { period: usize },
    /// Gaps shrink at least geometrically with ratio `rate`.
    GeometricDecay { rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownBehavior {
    pub x0: Vector,
    pub expected: Expected,
}

#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub qep: Qep,
    pub closed_form: Option<ClosedForm>,
    pub known_projected_solutions: Vec<Vector>,
    pub known_behaviors: Vec<KnownBehavior>,
    /// Lipschitz modulus of the solution map, when known exactly.
    pub solution_map_lipschitz: Option<f64>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("closed_form", &self.closed_form.is_some())
            .field("known_projected_solutions", &self.known_projected_solutions)
            .finish_non_exhaustive()
    }
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.qep.dim()
    }

    pub fn domain(&self) -> &ConvexSet {
        self.qep.domain()
    }

    /// The procedure using the closed form when the instance has one.
    pub fn procedure(&self) -> Procedure<'_> {
        Procedure::new(&self.qep).with_closed_form(self.closed_form.clone())
    }

    /// `S(x)`, if the instance has a closed form.
    pub fn solution_map(&self, x: &Vector) -> Option<Vector> {
        self.closed_form.as_ref().map(|s| s(x))
    }
}

/// `C = [-1,1] x {0}`, `Phi(x) = {-x_1} x [1,2]`, `f(x,y) = y_2 - x_2`.
///
/// `S(x) = (-x_1, 1)`, so iterates alternate between `x_0` and `-x_0`; the
/// only projected solution is the origin.
pub fn make_counterexample() -> ProblemInstance {
    let domain = ConvexSet::segment(vector(&[-1.0, 0.0]), vector(&[1.0, 0.0])).expect("valid segment");
    let map = ConstraintMap::new(domain, |x| {
        Ok(ConvexSet::segment(vector(&[-x[0], 1.0]), vector(&[-x[0], 2.0]))?)
    });
    let f = Bifunction::coordinate_difference(2, 1).expect("index in range");
    ProblemInstance {
        name: "counterexample".into(),
        qep: Qep::new(f, map).expect("counterexample is well formed"),
        closed_form: Some(Arc::new(|x: &Vector| vector(&[-x[0], 1.0]))),
        known_projected_solutions: vec![vector(&[0.0, 0.0])],
        known_behaviors: vec![
            KnownBehavior { x0: vector(&[0.5, 0.0]), expected: Expected::Cycling { period: 2 } },
            KnownBehavior {
                x0: vector(&[0.0, 0.0]),
                expected: Expected::Converged { to: vector(&[0.0, 0.0]), steps: 1 },
            },
        ],
        solution_map_lipschitz: Some(1.0),
    }
}

/// The counterexample's bifunction read as `(y_2)^2 - (x_2)^2`; same solution
/// map since `y_2 >= 1` on every `Phi(x)`.
pub fn counterexample_squared_bifunction() -> Bifunction {
    Bifunction::custom(2, |x, y| y[1] * y[1] - x[1] * x[1])
}

fn unit_square() -> ConvexSet {
    ConvexSet::cube(2, 0.0, 1.0).expect("valid box")
}

/// `C = {x in [0,1]^2 : x_1 + x_2 >= 1}`, `Phi(x) = Q + 2x/|x|` with `Q` the
/// unit square, `f(x,y) = <x, y - x>`; `S(x) = 2x/|x|`.
pub fn make_moving_square() -> ProblemInstance {
    let domain = ConvexSet::polytope(vec![
        crate::geometry::Halfspace::new(vector(&[1.0, 0.0]), 1.0),
        crate::geometry::Halfspace::new(vector(&[-1.0, 0.0]), 0.0),
        crate::geometry::Halfspace::new(vector(&[0.0, 1.0]), 1.0),
        crate::geometry::Halfspace::new(vector(&[0.0, -1.0]), 0.0),
        crate::geometry::Halfspace::new(vector(&[-1.0, -1.0]), -1.0),
    ])
    .expect("valid triangle");
    let map = ConstraintMap::new(domain, |x| {
        let norm = x.norm();
        if norm == 0.0 {
            return Err(ProblemError::UndefinedAtPoint("|x| = 0".into()));
        }
        Ok(unit_square().translate(x * (2.0 / norm))?)
    });
    let converged = |p: &[f64], steps| KnownBehavior {
        x0: vector(p),
        expected: Expected::Converged { to: vector(if steps == 4 { &[1.0, 1.0] } else { p }), steps },
    };
    ProblemInstance {
        name: "moving_square".into(),
        qep: Qep::new(Bifunction::vi_identity(2), map).expect("moving square is well formed"),
        closed_form: Some(Arc::new(|x: &Vector| x * (2.0 / x.norm()))),
        known_projected_solutions: vec![vector(&[1.0, 0.0]), vector(&[1.0, 1.0]), vector(&[0.0, 1.0])],
        known_behaviors: vec![
            converged(&[1.0, 0.0], 1),
            converged(&[1.0, 1.0], 1),
            converged(&[0.0, 1.0], 1),
            converged(&[1.0, 0.2], 4),
        ],
        solution_map_lipschitz: None,
    }
}

/// Piecewise form of `P_C(S(x))` for the moving square. The boundary rays
/// `x_2 = x_1 / sqrt(3)` and `x_2 = sqrt(3) x_1` belong to the middle branch.
pub fn moving_square_composite(x: &Vector) -> Vector {
    let norm = x.norm();
    let sqrt3 = 3f64.sqrt();
    if x[1] < x[0] * sqrt3 / 3.0 {
        vector(&[1.0, 2.0 * x[1] / norm])
    } else if x[1] <= sqrt3 * x[0] {
        vector(&[1.0, 1.0])
    } else {
        vector(&[2.0 * x[0] / norm, 1.0])
    }
}

/// Second coordinate of `x_k` while the iterates stay in the lower branch:
/// `2^k x_2 / sqrt(x_1^2 + (4^k - 1)/3 * x_2^2)`.
pub fn moving_square_k_step(x0: &Vector, k: u32) -> f64 {
    let two_k = 2f64.powi(k as i32);
    let four_k = 4f64.powi(k as i32);
    two_k * x0[1] / (x0[0] * x0[0] + (four_k - 1.0) / 3.0 * x0[1] * x0[1]).sqrt()
}

/// `(1, 1/2, ..., 1/n)`
pub fn l2_weights(n: usize) -> Vector {
    Vector::from_fn(n, |k, _| 1.0 / (k + 1) as f64)
}

/// Truncation to `R^n` of the sequence-space example:
/// `C = {x >= 0} ∩ B`, `Phi(x) = (3 - |x|) w + {u : 0 <= u_k <= (1 + |x|) w_k}`
/// with `w = (1/k)`, `f(x,y) = <x, y - x>`; `S(x) = (3 - |x|) w` and
/// `P_C(S(x)) = w / |w|` from any start.
pub fn make_l2_truncated(n: usize) -> Result<ProblemInstance, InstanceError> {
    if !(2..=100).contains(&n) {
        return Err(InstanceError::InvalidParameter(format!("l2_truncated needs 2 <= n <= 100, got {n}")));
    }
    let w = l2_weights(n);
    let domain = ConvexSet::orthant_ball(n, 1.0).map_err(ProblemError::from)?;
    let map_w = w.clone();
    let map = ConstraintMap::new(domain, move |x| {
        let norm = x.norm();
        let upper = &map_w * (1.0 + norm);
        Ok(ConvexSet::new_box(Vector::zeros(map_w.len()), upper)?.translate(&map_w * (3.0 - norm))?)
    });
    let solution = &w / w.norm();
    let closed_w = w.clone();
    Ok(ProblemInstance {
        name: format!("l2_truncated:{n}"),
        qep: Qep::new(Bifunction::vi_identity(n), map)?,
        closed_form: Some(Arc::new(move |x: &Vector| &closed_w * (3.0 - x.norm()))),
        known_projected_solutions: vec![solution.clone()],
        known_behaviors: vec![
            KnownBehavior { x0: Vector::zeros(n), expected: Expected::Converged { to: solution.clone(), steps: 2 } },
            KnownBehavior {
                x0: Vector::from_fn(n, |k, _| if k == n - 1 { 1.0 } else { 0.0 }),
                expected: Expected::Converged { to: solution, steps: 2 },
            },
        ],
        solution_map_lipschitz: Some(w.norm()),
    })
}

/// Synthetic instance with contracting solution map `S(x) = q x + c` where
/// `c = 2 e_1`: `C = [-1,1]^n`, `Phi(x) = Ball(q x + c, 0.1)` and, per outer
/// point, `f(y, y') = <y - (q x + c), y' - y>`. The projected solution is
/// `e_1`, on the boundary of `C`.
pub fn make_contraction_fixture(q: f64, dim: usize) -> Result<ProblemInstance, InstanceError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(InstanceError::InvalidModulus(q));
    }
    if dim == 0 {
        return Err(InstanceError::InvalidParameter("dimension must be at least 1".into()));
    }
    let offset = Vector::from_fn(dim, |k, _| if k == 0 { 2.0 } else { 0.0 });
    let domain = ConvexSet::cube(dim, -1.0, 1.0).map_err(ProblemError::from)?;
    let map_offset = offset.clone();
    let map = ConstraintMap::new(domain, move |x| Ok(ConvexSet::ball(x * q + &map_offset, 0.1)?));
    let f_offset = offset.clone();
    let f = Bifunction::per_outer(dim, move |x| {
        let center = x * q + &f_offset;
        Bifunction::vi(dim, move |y| y - &center)
    });
    let fixed = Vector::from_fn(dim, |k, _| if k == 0 { 1.0 } else { 0.0 });
    let start = Vector::from_fn(dim, |k, _| if k == 0 { -1.0 } else { 0.5 });
    Ok(ProblemInstance {
        name: if dim == 2 { format!("contraction:{q}") } else { format!("contraction:{q}:{dim}") },
        qep: Qep::new(f, map)?,
        closed_form: Some(Arc::new(move |x: &Vector| x * q + &offset)),
        known_projected_solutions: vec![fixed.clone()],
        known_behaviors: vec![
            KnownBehavior { x0: start, expected: Expected::GeometricDecay { rate: q } },
            KnownBehavior { x0: fixed.clone(), expected: Expected::Converged { to: fixed, steps: 1 } },
        ],
        solution_map_lipschitz: Some(q),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceInfo {
    pub pattern: &'static str,
    pub description: &'static str,
}

pub fn list_instances() -> Vec<InstanceInfo> {
    vec![
        InstanceInfo {
            pattern: "counterexample",
            description: "segment domain, reflected constraint segment; period-2 cycle from any nonzero start",
        },
        InstanceInfo {
            pattern: "moving_square",
            description: "triangle domain, unit square moved to 2x/|x|; projected solutions (1,0), (1,1), (0,1)",
        },
        InstanceInfo {
            pattern: "l2_truncated:<n>",
            description: "orthant-ball domain in R^n (2 <= n <= 100); converges to w/|w| in two steps",
        },
        InstanceInfo {
            pattern: "contraction:<q>[:<dim>]",
            description: "box domain, solution map q x + 2 e_1 (0 < q < 1, default dim 2); fixed point e_1",
        },
    ]
}

/// Looks up an instance by name, e.g. `l2_truncated:16` or `contraction:0.5:3`.
pub fn instance_by_name(name: &str) -> Result<ProblemInstance, InstanceError> {
    let mut parts = name.trim().split(':');
    let head = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let bad = |what: &str| InstanceError::InvalidParameter(format!("{what} in `{name}`"));
    match (head, args.as_slice()) {
        ("counterexample", []) => Ok(make_counterexample()),
        ("moving_square", []) => Ok(make_moving_square()),
        ("l2_truncated", [n]) => make_l2_truncated(n.parse().map_err(|_| bad("dimension"))?),
        ("contraction", [q]) => make_contraction_fixture(q.parse().map_err(|_| bad("modulus"))?, 2),
        ("contraction", [q, d]) => make_contraction_fixture(
            q.parse().map_err(|_| bad("modulus"))?,
            d.parse().map_err(|_| bad("dimension"))?,
        ),
        _ => Err(InstanceError::Unknown(name.to_string())),
    }
}
