use std::cmp::Ordering;

use nalgebra::DVector;
use rand::Rng;

use super::{ConvexSet, GeometryError, Vector, DEFAULT_TOL};

/// Largest dimension for which grids are enumerated.
pub const GRID_DIMENSION_LIMIT: usize = 4;

const PRIMES: [u32; 25] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut result = 0.0;
    let mut scale = inv;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    result
}

fn prime(k: usize) -> u64 {
    if k < PRIMES.len() {
        return PRIMES[k] as u64;
    }
    // beyond the table, walk odd numbers
    let mut found = PRIMES.len();
    let mut candidate = 101u64;
    loop {
        if (3..).step_by(2).take_while(|d| d * d <= candidate).all(|d| !candidate.is_multiple_of(d)) {
            if found == k {
                return candidate;
            }
            found += 1;
        }
        candidate += 2;
    }
}

/// Deterministic set of `count` unit directions in `R^dim`.
///
/// In the plane the directions are equally spaced angles. Otherwise the net
/// starts with `+-e_k` and is filled with Halton points of `[-1, 1]^dim`,
/// normalized.
pub fn direction_net(dim: usize, count: usize) -> Vec<Vector> {
    if dim == 1 {
        return vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)];
    }
    if dim == 2 {
        return (0..count)
            .map(|i| {
                let angle = std::f64::consts::TAU * i as f64 / count as f64;
                DVector::from_column_slice(&[angle.cos(), angle.sin()])
            })
            .collect();
    }
    let mut net = Vec::with_capacity(count);
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[k] = sign;
            net.push(e);
        }
    }
    let bases: Vec<u64> = (0..dim).map(prime).collect();
    let mut index = 1u64;
    while net.len() < count {
        let d = DVector::from_iterator(dim, bases.iter().map(|&b| 2.0 * radical_inverse(index, b) - 1.0));
        index += 1;
        let norm = d.norm();
        if norm > 1e-6 {
            net.push(d / norm);
        }
    }
    net
}

fn lexicographic(a: &Vector, b: &Vector) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Points covering `set` at spacing `resolution`: the lattice over the
/// bounding box, each point projected onto the set, deduplicated and sorted
/// lexicographically.
///
/// Projection keeps degenerate sets (segments, faces) covered, and every
/// point of the set lies within `resolution * sqrt(dim) / 2` of the cover.
pub fn grid_cover(set: &ConvexSet, resolution: f64) -> Result<Vec<Vector>, GeometryError> {
    let dim = set.dim();
    if dim > GRID_DIMENSION_LIMIT {
        return Err(GeometryError::DimensionTooHigh { dim, limit: GRID_DIMENSION_LIMIT });
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(GeometryError::InvalidSet(format!("grid resolution {resolution} must be positive")));
    }
    let (lower, upper) = set.bounding_box()?;
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let (lo, hi) = (lower[k], upper[k]);
            let steps = ((hi - lo) / resolution + 1e-9).floor() as usize;
            let mut ticks: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * resolution).collect();
            let last = *ticks.last().unwrap();
            if hi - last > 1e-12 * (1.0 + hi.abs()) {
                ticks.push(hi);
            }
            ticks
        })
        .collect();

    let total: usize = axes.iter().map(Vec::len).product();
    let mut points = Vec::with_capacity(total);
    let mut index = vec![0usize; dim];
    for _ in 0..total {
        let raw = DVector::from_iterator(dim, index.iter().enumerate().map(|(k, &i)| axes[k][i]));
        points.push(set.project(&raw, DEFAULT_TOL)?.point);
        for k in (0..dim).rev() {
            index[k] += 1;
            if index[k] < axes[k].len() {
                break;
            }
            index[k] = 0;
        }
    }
    points.sort_by(lexicographic);
    points.dedup_by(|a, b| (&*a - &*b).norm() <= 1e-12);
    Ok(points)
}

/// Draws a point of `set`: uniform over its bounding box, then projected.
pub fn sample_point<R: Rng + ?Sized>(set: &ConvexSet, rng: &mut R) -> Result<Vector, GeometryError> {
    let (lower, upper) = set.bounding_box()?;
    let raw = DVector::from_iterator(
        set.dim(),
        lower.iter().zip(upper.iter()).map(|(l, u)| l + (u - l) * rng.random::<f64>()),
    );
    Ok(set.project(&raw, DEFAULT_TOL)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vector;

    #[test]
    fn net_is_unit_and_sized() {
        for dim in [2, 3, 5] {
            let net = direction_net(dim, 64 * dim);
            assert_eq!(net.len(), 64 * dim);
            assert!(net.iter().all(|d| (d.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn prime_table_extends() {
        assert_eq!(prime(24), 97);
        assert_eq!(prime(25), 101);
        assert_eq!(prime(26), 103);
    }

    #[test]
    fn segment_cover_lies_on_segment() {
        let seg = ConvexSet::segment(vector(&[-0.5, 1.0]), vector(&[-0.5, 2.0])).unwrap();
        let pts = grid_cover(&seg, 0.25).unwrap();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0], vector(&[-0.5, 1.0]));
        assert_eq!(pts[4], vector(&[-0.5, 2.0]));
    }

    #[test]
    fn cover_rejects_high_dimension() {
        let cube = ConvexSet::cube(5, 0.0, 1.0).unwrap();
        assert!(matches!(grid_cover(&cube, 0.5), Err(GeometryError::DimensionTooHigh { .. })));
    }
}
