//! The procedure can cycle: on the segment example the iterates alternate
//! between `x0` and `-x0` forever, while the origin is a projected solution.

use projsol::algorithm::{asymptotic_regularity_profile, Outcome, OuterConfig};
use projsol::geometry::vector;
use projsol::instances::make_counterexample;

fn main() {
    let inst = make_counterexample();
    let cfg = OuterConfig::default();

    let run = inst.procedure().run(&vector(&[0.5, 0.0]), &cfg).expect("run");
    println!("from (0.5, 0): {}", run.outcome);
    for (i, x) in run.trace.xs.iter().take(4).enumerate() {
        println!("  x_{i} = ({:+.2}, {:+.2})", x[0], x[1]);
    }
    let profile = asymptotic_regularity_profile(&run.trace);
    println!("  trailing gap max {:.3}, never tends to zero", profile.tail_max);

    let run = inst.procedure().run(&vector(&[0.0, 0.0]), &cfg).expect("run");
    if let Outcome::Converged(cert) = run.outcome {
        println!("from the origin: converged, certificate valid = {}", cert.valid);
    }
}
