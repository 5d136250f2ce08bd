//! Estimated problem constants, the contraction modulus they imply, and an
//! independent check of a claimed projected solution.

use projsol::algorithm::{contraction_certificate, verify_projected_solution, OuterConfig};
use projsol::ep_solver::InnerConfig;
use projsol::geometry::vector;
use projsol::instances::instance_by_name;
use projsol::problems::estimate_constants;
use std::f64::consts::SQRT_2;

fn main() {
    for name in ["moving_square", "l2_truncated:4"] {
        let inst = instance_by_name(name).expect("instance");
        let c = estimate_constants(&inst.qep, 16, 0).expect("constants");
        let x0 = inst.known_behaviors[0].x0.clone();
        let z0 = inst.procedure().solution(&x0, &InnerConfig::default()).expect("solution").point;
        let report = contraction_certificate(c, &x0, &z0);
        println!(
            "{name}: L = {:.3} ({:?}), m = {:.3} ({:?}), R = {:.3} ({:?}), q = {:.3}, guaranteed {}",
            c.lipschitz.value,
            c.lipschitz.provenance,
            c.strong_monotonicity.value,
            c.strong_monotonicity.provenance,
            c.quadratic.value,
            c.quadratic.provenance,
            report.q,
            report.guaranteed
        );
    }

    let inst = instance_by_name("moving_square").unwrap();
    let cfg = OuterConfig::default();
    for (x, z) in [([1.0, 1.0], [SQRT_2, SQRT_2]), ([0.5, 0.5], [SQRT_2, SQRT_2])] {
        let cert = verify_projected_solution(&inst.qep, &vector(&x), &vector(&z), 1e-6, &cfg.inner).expect("check");
        println!(
            "claim x = {x:?}: in Phi(x) {}, residual ok {}, projection ok {} -> valid {}",
            cert.in_constraint, cert.residual_ok, cert.projection_ok, cert.valid
        );
    }
}
