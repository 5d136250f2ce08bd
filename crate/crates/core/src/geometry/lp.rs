//! Dense two-phase simplex for the small linear programs that come up with
//! polytopes: feasibility (phase 1) and support values `max <c, z>` subject to
//! `A z <= b` with `z` free.
//!
//! Bland's rule is used for both the entering and the leaving variable, so the
//! method terminates on degenerate vertices. Sizes here are tiny (a handful of
//! halfspaces, n <= 100), so the tableau is stored densely and reduced costs are
//! recomputed every pivot.

use nalgebra::DVector;

const PIVOT_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { point: DVector<f64>, value: f64 },
    Unbounded,
    Infeasible,
    IterationLimit,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor == 0.0 {
                continue;
            }
            for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.rows[i][c] = 0.0;
            self.rhs[i] -= factor * pivot_rhs;
            if self.rhs[i].abs() < 1e-14 {
                self.rhs[i] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost . vars` over the current tableau. `allowed[j] == false`
    /// keeps column `j` out of the basis.
    fn maximize(&mut self, cost: &[f64], allowed: &[bool], max_pivots: usize) -> Result<(), LpOutcome> {
        for _ in 0..max_pivots {
            let mut entering = None;
            for j in 0..self.ncols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| cost[b] * self.rows[i][j])
                        .sum::<f64>();
                if reduced > PIVOT_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[i] / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-14
                                || (ratio <= best + 1e-14 && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return Err(LpOutcome::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(LpOutcome::IterationLimit)
    }
}

/// Solves `max <c, z>` s.t. `<a_i, z> <= b_i` for all rows, `z` free.
///
/// `objective == None` runs phase 1 only and returns any feasible vertex with
/// value 0.
pub(crate) fn maximize(
    normals: &[DVector<f64>],
    offsets: &[f64],
    objective: Option<&DVector<f64>>,
    dim: usize,
) -> LpOutcome {
    let m = normals.len();
    // columns: z+ (dim), z- (dim), slacks (m), artificials (one per negative rhs)
    let negative: Vec<usize> = (0..m).filter(|&i| offsets[i] < 0.0).collect();
    let n_struct = 2 * dim + m;
    let ncols = n_struct + negative.len();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = 0;
    for i in 0..m {
        let sign = if offsets[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; ncols];
        for k in 0..dim {
            row[k] = sign * normals[i][k];
            row[dim + k] = -sign * normals[i][k];
        }
        row[2 * dim + i] = sign;
        if sign < 0.0 {
            row[n_struct + art] = 1.0;
            basis.push(n_struct + art);
            art += 1;
        } else {
            basis.push(2 * dim + i);
        }
        rows.push(row);
        rhs.push(sign * offsets[i]);
    }
    let mut tab = Tableau { rows, rhs, basis, ncols };
    let max_pivots = 50 * (m + ncols + 1);

    if !negative.is_empty() {
        let mut cost = vec![0.0; ncols];
        for c in cost.iter_mut().skip(n_struct) {
            *c = -1.0;
        }
        let allowed = vec![true; ncols];
        if let Err(outcome) = tab.maximize(&cost, &allowed, max_pivots) {
            // phase 1 is bounded above by zero, so only the iteration limit is possible
            return outcome;
        }
        let infeasibility: f64 = tab
            .basis
            .iter()
            .zip(&tab.rhs)
            .filter(|(&b, _)| b >= n_struct)
            .map(|(_, &v)| v)
            .sum();
        let scale = 1.0 + offsets.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if infeasibility > FEAS_EPS * scale {
            return LpOutcome::Infeasible;
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..tab.rows.len() {
            if tab.basis[r] >= n_struct {
                if let Some(c) = (0..n_struct).find(|&j| tab.rows[r][j].abs() > PIVOT_EPS) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().skip(n_struct) {
        *a = false;
    }
    let mut cost = vec![0.0; ncols];
    if let Some(c) = objective {
        for k in 0..dim {
            cost[k] = c[k];
            cost[dim + k] = -c[k];
        }
        if let Err(outcome) = tab.maximize(&cost, &allowed, max_pivots) {
            return outcome;
        }
    }

    let mut vars = vec![0.0; ncols];
    for (r, &b) in tab.basis.iter().enumerate() {
        vars[b] = tab.rhs[r];
    }
    let point = DVector::from_fn(dim, |k, _| vars[k] - vars[dim + k]);
    let value = objective.map_or(0.0, |c| c.dot(&point));
    LpOutcome::Optimal { point, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn triangle() -> (Vec<DVector<f64>>, Vec<f64>) {
        // 0 <= x1 <= 1, 0 <= x2 <= 1, x1 + x2 >= 1
        (
            vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0]), v(&[-1.0, -1.0])],
            vec![1.0, 0.0, 1.0, 0.0, -1.0],
        )
    }

    #[test]
    fn support_of_triangle() {
        let (a, b) = triangle();
        let cases = [([1.0, 1.0], 2.0), ([-1.0, -1.0], -1.0), ([1.0, -1.0], 1.0), ([-1.0, 0.0], 0.0)];
        for (dir, expected) in cases {
            match maximize(&a, &b, Some(&v(&dir)), 2) {
                LpOutcome::Optimal { value, point } => {
                    assert!((value - expected).abs() < 1e-12, "{dir:?}: {value}");
                    for (ai, bi) in a.iter().zip(&b) {
                        assert!(ai.dot(&point) <= bi + 1e-12);
                    }
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn detects_infeasible() {
        let a = vec![v(&[1.0]), v(&[-1.0])];
        let b = vec![0.0, -1.0]; // x <= 0 and x >= 1
        assert_eq!(maximize(&a, &b, None, 1), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let a = vec![v(&[-1.0, 0.0]), v(&[0.0, -1.0])];
        let b = vec![0.0, 0.0];
        assert_eq!(maximize(&a, &b, Some(&v(&[1.0, 0.0])), 2), LpOutcome::Unbounded);
    }

    #[test]
    fn phase_one_point_is_feasible() {
        let (a, b) = triangle();
        let LpOutcome::Optimal { point, .. } = maximize(&a, &b, None, 2) else {
            panic!()
        };
        for (ai, bi) in a.iter().zip(&b) {
            assert!(ai.dot(&point) <= bi + 1e-12);
        }
    }

    /// `max <c, v>` over the vertices from every pair of tight rows.
    fn brute_force_support(a: &[DVector<f64>], b: &[f64], c: &DVector<f64>) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let det = a[i][0] * a[j][1] - a[i][1] * a[j][0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = v(&[(b[i] * a[j][1] - a[i][1] * b[j]) / det, (a[i][0] * b[j] - b[i] * a[j][0]) / det]);
                if a.iter().zip(b).all(|(ak, bk)| ak.dot(&p) <= bk + 1e-9) {
                    best = best.max(c.dot(&p));
                }
            }
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn support_matches_vertex_enumeration(
            extra in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.05f64..1.0), 1..5),
            c in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let (mut a, mut b) = (vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0])], vec![1.0; 4]);
            for (p, q, r) in extra {
                a.push(v(&[p, q]));
                b.push(r);
            }
            let c = v(&[c.0, c.1]);
            let LpOutcome::Optimal { value, .. } = maximize(&a, &b, Some(&c), 2) else { panic!("bounded and feasible") };
            proptest::prop_assert!((value - brute_force_support(&a, &b, &c)).abs() < 1e-9);
        }
    }
}
