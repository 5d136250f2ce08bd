//! Brute-force grid search for projected solutions, independent of the
//! iteration.

use projsol::algorithm::fixed_point_oracle;
use projsol::ep_solver::InnerConfig;
use projsol::instances::instance_by_name;

fn main() {
    for name in ["counterexample", "moving_square", "contraction:0.5"] {
        let inst = instance_by_name(name).expect("instance");
        let points = fixed_point_oracle(&inst.procedure(), 0.05, 1e-6, &InnerConfig::default()).expect("oracle");
        println!("{name}: {} grid points", points.len());
        for p in points {
            println!("  ({:.3}, {:.3})", p[0], p[1]);
        }
    }
}
