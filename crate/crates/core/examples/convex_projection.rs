//! Projection onto the supported convex sets.

use projsol::geometry::{dykstra, vector, ConvexSet, Halfspace, DEFAULT_TOL};

fn main() {
    let x = vector(&[2.0, -0.5]);
    let triangle = ConvexSet::polytope(vec![
        Halfspace::new(vector(&[-1.0, 0.0]), 0.0),
        Halfspace::new(vector(&[0.0, -1.0]), 0.0),
        Halfspace::new(vector(&[1.0, 1.0]), 1.0),
    ])
    .expect("triangle");
    let sets = [
        ("box", ConvexSet::cube(2, 0.0, 1.0).unwrap()),
        ("ball", ConvexSet::ball(vector(&[0.0, 0.0]), 1.0).unwrap()),
        ("segment", ConvexSet::segment(vector(&[0.0, 0.0]), vector(&[1.0, 1.0])).unwrap()),
        ("triangle", triangle),
        ("orthant ball", ConvexSet::orthant_ball(2, 1.0).unwrap()),
        ("box + ball", ConvexSet::cube(2, 0.0, 1.0).unwrap().minkowski_sum(ConvexSet::ball(vector(&[0.0, 0.0]), 0.5).unwrap()).unwrap()),
    ];
    for (name, set) in &sets {
        let p = set.project(&x, DEFAULT_TOL).expect("projection");
        println!("{name:<13} P(x) = ({:.4}, {:.4})  distance {:.4}", p.point[0], p.point[1], p.distance);
    }

    // Dykstra's method on an intersection, given only the two projections
    let pieces = [ConvexSet::cube(2, 0.0, 1.0).unwrap(), ConvexSet::ball(vector(&[1.0, 0.0]), 0.5).unwrap()];
    let projections: Vec<_> = pieces
        .iter()
        .map(|s| move |y: &projsol::geometry::Vector| s.project(y, DEFAULT_TOL).unwrap().point)
        .collect();
    let d = dykstra(&projections, &x, 1e-12, 10_000).expect("dykstra");
    println!("box ∩ ball    P(x) = ({:.4}, {:.4})  via Dykstra", d[0], d[1]);
}
