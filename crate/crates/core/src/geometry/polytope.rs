//! Bounded polytopes in H-representation, `{z : <a_i, z> <= b_i}`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::lp::{self, LpOutcome};
use super::{dykstra, GeometryError, Vector};

/// Closed halfspace `<normal, z> <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vector,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vector, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn project(&self, x: &Vector) -> Vector {
        let excess = self.normal.dot(x) - self.offset;
        if excess <= 0.0 {
            return x.clone();
        }
        x - &self.normal * (excess / self.normal.norm_squared())
    }
}

/// A nonempty, bounded intersection of halfspaces.
///
/// Construction runs a phase-1 feasibility solve and checks that the support
/// value along every `+-e_k` is finite. The phase-1 vertex is kept as the
/// starting point for projections.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    dim: usize,
    anchor: Vector,
    scale: f64,
}

impl Polytope {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        let dim = halfspaces
            .first()
            .map(|h| h.normal.len())
            .ok_or_else(|| GeometryError::InvalidSet("polytope needs at least one halfspace".into()))?;
        if dim == 0 {
            return Err(GeometryError::InvalidSet("dimension must be at least 1".into()));
        }
        let mut kept = Vec::with_capacity(halfspaces.len());
        for h in halfspaces {
            if h.normal.len() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, found: h.normal.len() });
            }
            if !h.offset.is_finite() || h.normal.iter().any(|v| !v.is_finite()) {
                return Err(GeometryError::NonFinite("halfspace"));
            }
            if h.normal.norm() == 0.0 {
                // 0 <= b: redundant or empty
                if h.offset < 0.0 {
                    return Err(GeometryError::InfeasibleSet);
                }
                continue;
            }
            kept.push(h);
        }
        let normals: Vec<Vector> = kept.iter().map(|h| h.normal.clone()).collect();
        let offsets: Vec<f64> = kept.iter().map(|h| h.offset).collect();
        let anchor = match lp::maximize(&normals, &offsets, None, dim) {
            LpOutcome::Optimal { point, .. } => point,
            LpOutcome::Infeasible => return Err(GeometryError::InfeasibleSet),
            LpOutcome::Unbounded => unreachable!("phase 1 has no objective"),
            LpOutcome::IterationLimit => {
                return Err(GeometryError::NonConvergence { method: "simplex", budget: 0 })
            }
        };
        let scale = 1.0 + offsets.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let poly = Self { halfspaces: kept, dim, anchor, scale };
        for k in 0..dim {
            for sign in [1.0, -1.0] {
                let mut d = DVector::zeros(dim);
                d[k] = sign;
                poly.support(&d)?;
            }
        }
        Ok(poly)
    }

    /// Builds a polytope from rows `(normal, offset)`.
    pub fn from_rows(rows: &[(Vec<f64>, f64)]) -> Result<Self, GeometryError> {
        Self::new(
            rows.iter()
                .map(|(a, b)| Halfspace::new(DVector::from_column_slice(a), *b))
                .collect(),
        )
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A point of the polytope (a vertex found by phase 1).
    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn support(&self, direction: &Vector) -> Result<f64, GeometryError> {
        let normals: Vec<Vector> = self.halfspaces.iter().map(|h| h.normal.clone()).collect();
        let offsets: Vec<f64> = self.halfspaces.iter().map(|h| h.offset).collect();
        match lp::maximize(&normals, &offsets, Some(direction), self.dim) {
            LpOutcome::Optimal { value, .. } => Ok(value),
            LpOutcome::Unbounded => Err(GeometryError::UnboundedSupport),
            LpOutcome::Infeasible => Err(GeometryError::InfeasibleSet),
            LpOutcome::IterationLimit => Err(GeometryError::NonConvergence { method: "simplex", budget: 0 }),
        }
    }

    fn violation(&self, x: &Vector) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.normal.dot(x) - h.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean projection by a primal active-set method on
    /// `min 1/2 |z - x|^2  s.t.  A z <= b`, started from the phase-1 vertex.
    ///
    /// The final point is recomputed from `x` and the optimal working set, so
    /// vertices and faces come out exact up to rounding of a single solve.
    pub fn project(&self, x: &Vector) -> Result<Vector, GeometryError> {
        if self.violation(x) <= 1e-14 * self.scale {
            return Ok(x.clone());
        }
        let m = self.halfspaces.len();
        let budget = (10 * self.dim * m).max(100);
        let mut z = self.anchor.clone();
        let mut working: Vec<usize> = Vec::new();
        for i in 0..m {
            let h = &self.halfspaces[i];
            if (h.normal.dot(&z) - h.offset).abs() <= 1e-10 * self.scale && self.independent(&working, i) {
                working.push(i);
            }
        }

        for _ in 0..budget {
            let g = x - &z;
            let (step, multipliers) = self.null_space_step(&working, &g);
            if step.norm() <= 1e-13 * (1.0 + g.norm()) {
                let most_negative = multipliers
                    .iter()
                    .enumerate()
                    .filter(|(_, &mu)| mu < -1e-12)
                    .min_by(|a, b| a.1.total_cmp(b.1));
                match most_negative {
                    Some((pos, _)) => {
                        working.remove(pos);
                        continue;
                    }
                    None => return Ok(self.polish(x, &working).unwrap_or(z)),
                }
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for (i, h) in self.halfspaces.iter().enumerate() {
                if working.contains(&i) {
                    continue;
                }
                let rate = h.normal.dot(&step);
                if rate > 1e-14 * step.norm() * h.normal.norm() {
                    let slack = (h.offset - h.normal.dot(&z)).max(0.0);
                    let t = slack / rate;
                    if t < alpha {
                        alpha = t;
                        blocking = Some(i);
                    }
                }
            }
            z += &step * alpha;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        Err(GeometryError::NonConvergence { method: "active-set projection", budget })
    }

    /// Projection by Dykstra's alternating scheme over the halfspaces. Slower
    /// and only accurate to roughly `tol`; kept as an independent route.
    pub fn project_by_alternation(&self, x: &Vector, tol: f64, max_sweeps: usize) -> Result<Vector, GeometryError> {
        let projections: Vec<_> = self
            .halfspaces
            .iter()
            .map(|h| move |v: &Vector| h.project(v))
            .collect();
        dykstra(&projections, x, tol, max_sweeps)
    }

    fn rows(&self, working: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(working.len(), self.dim, |r, c| self.halfspaces[working[r]].normal[c])
    }

    fn gram_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let gram = a * a.transpose();
        match Cholesky::new(gram.clone()) {
            Some(ch) => ch.solve(rhs),
            None => gram
                .svd(true, true)
                .solve(rhs, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(rhs.len())),
        }
    }

    fn independent(&self, working: &[usize], candidate: usize) -> bool {
        let a = &self.halfspaces[candidate].normal;
        if working.is_empty() {
            return true;
        }
        let rows = self.rows(working);
        let coeffs = Self::gram_solve(&rows, &(&rows * a));
        let residual = a - rows.transpose() * coeffs;
        residual.norm() > 1e-9 * a.norm()
    }

    /// Returns `(p, mu)` with `p = g - A_W^T mu` the projection of `g` onto the
    /// null space of the working rows.
    fn null_space_step(&self, working: &[usize], g: &Vector) -> (Vector, DVector<f64>) {
        if working.is_empty() {
            return (g.clone(), DVector::zeros(0));
        }
        let rows = self.rows(working);
        let mu = Self::gram_solve(&rows, &(&rows * g));
        (g - rows.transpose() * &mu, mu)
    }

    fn polish(&self, x: &Vector, working: &[usize]) -> Option<Vector> {
        if working.is_empty() {
            return Some(x.clone());
        }
        let rows = self.rows(working);
        let b = DVector::from_iterator(working.len(), working.iter().map(|&i| self.halfspaces[i].offset));
        let mu = Self::gram_solve(&rows, &(&rows * x - b));
        let z = x - rows.transpose() * &mu;
        let ok = mu.iter().all(|&m| m >= -1e-10) && self.violation(&z) <= 1e-10 * self.scale;
        ok.then_some(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        DVector::from_column_slice(xs)
    }

    fn triangle() -> Polytope {
        Polytope::from_rows(&[
            (vec![1.0, 0.0], 1.0),
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, 1.0], 1.0),
            (vec![0.0, -1.0], 0.0),
            (vec![-1.0, -1.0], -1.0),
        ])
        .unwrap()
    }

    #[test]
    fn projects_onto_vertex_exactly() {
        let p = triangle().project(&v(&[2f64.sqrt(), 2f64.sqrt()])).unwrap();
        assert_eq!(p, v(&[1.0, 1.0]));
    }

    #[test]
    fn projects_onto_hypotenuse() {
        let p = triangle().project(&v(&[0.2, 0.4])).unwrap();
        assert!((p - v(&[0.4, 0.6])).norm() < 1e-14);
    }

    #[test]
    fn interior_point_is_fixed() {
        let x = v(&[0.7, 0.6]);
        assert_eq!(triangle().project(&x).unwrap(), x);
    }

    #[test]
    fn empty_polytope_is_rejected() {
        let err = Polytope::from_rows(&[(vec![1.0], 0.0), (vec![-1.0], -1.0)]).unwrap_err();
        assert_eq!(err, GeometryError::InfeasibleSet);
    }

    #[test]
    fn unbounded_polytope_is_rejected() {
        let err = Polytope::from_rows(&[(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0)]).unwrap_err();
        assert_eq!(err, GeometryError::UnboundedSupport);
    }

    #[test]
    fn alternation_agrees_with_active_set() {
        let poly = triangle();
        for x in [v(&[3.0, -2.0]), v(&[-1.0, -1.0]), v(&[0.1, 0.3]), v(&[0.5, 2.0])] {
            let exact = poly.project(&x).unwrap();
            let alt = poly.project_by_alternation(&x, 1e-12, 100_000).unwrap();
            assert!((exact - alt).norm() < 1e-8);
        }
    }
}
