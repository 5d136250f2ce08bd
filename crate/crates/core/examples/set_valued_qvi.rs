//! A quasi-variational inequality with a set-valued operator, posed through
//! `G_T(x, y) = sup_{t in T(x)} <t, y - x>` and solved on the grid.

use projsol::algorithm::{Outcome, OuterConfig, Procedure};
use projsol::ep_solver::{InnerConfig, InnerMethod};
use projsol::geometry::{vector, ConvexSet};
use projsol::problems::{Bifunction, ConstraintMap, Qep, SetValuedOperator};

fn main() {
    // T(x) = Ball(x, 0.1): monotone, set valued
    let t = SetValuedOperator::new(2, |x| Ok(ConvexSet::ball(x.clone(), 0.1)?));
    let domain = ConvexSet::cube(2, 0.0, 1.0).expect("box");
    let map = ConstraintMap::new(domain, |x| Ok(ConvexSet::cube(2, 0.0, 1.0)?.translate(x * 0.3 + vector(&[0.5, 0.2]))?));
    let qep = Qep::new(Bifunction::operator_sup(t), map).expect("qep");

    let cfg = OuterConfig {
        inner: InnerConfig { method: InnerMethod::GridOracle, grid_resolution: 0.01, ..InnerConfig::default() },
        stop_tol: 1e-6,
        certify_eps: 0.05,
        ..OuterConfig::default()
    };
    let run = Procedure::new(&qep).run(&vector(&[1.0, 1.0]), &cfg).expect("run");
    println!("outcome: {}", run.outcome);
    if let Outcome::Converged(cert) = run.outcome {
        println!("x = ({:.3}, {:.3}), z = ({:.3}, {:.3})", cert.x[0], cert.x[1], cert.z[0], cert.z[1]);
    }
}
