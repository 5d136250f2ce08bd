//! Truncations of the sequence-space example converge in two steps to
//! `w / |w|`, and `|w|` approaches `pi / sqrt(6)`.

use projsol::algorithm::{Outcome, OuterConfig};
use projsol::geometry::Vector;
use projsol::instances::{l2_weights, make_l2_truncated};

fn main() {
    for n in [2, 4, 16, 64] {
        let inst = make_l2_truncated(n).expect("instance");
        let run = inst.procedure().run(&Vector::zeros(n), &OuterConfig::default()).expect("run");
        let w = l2_weights(n);
        let err = match &run.outcome {
            Outcome::Converged(cert) => (&cert.x - &w / w.norm()).norm(),
            other => panic!("n = {n}: {other}"),
        };
        println!("n = {n:>2}: {} steps, |w| = {:.6}, error {err:.1e}", run.trace.zs.len(), w.norm());
    }
    println!("limit pi/sqrt(6) = {:.6}", std::f64::consts::PI / 6f64.sqrt());
}
