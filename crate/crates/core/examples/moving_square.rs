//! Moving square: three projected solutions, and a start that reaches
//! `(1, 1)` after a few steps along the closed-form recursion.

use projsol::algorithm::OuterConfig;
use projsol::geometry::vector;
use projsol::instances::{make_moving_square, moving_square_composite, moving_square_k_step};

fn main() {
    let inst = make_moving_square();
    let cfg = OuterConfig::default();

    for p in &inst.known_projected_solutions {
        let image = moving_square_composite(p);
        println!("T({:.1}, {:.1}) = ({:.1}, {:.1})", p[0], p[1], image[0], image[1]);
    }

    let x0 = vector(&[1.0, 0.2]);
    let run = inst.procedure().run(&x0, &cfg).expect("run");
    println!("from (1, 0.2): {}", run.outcome);
    for (k, x) in run.trace.xs.iter().enumerate() {
        let formula = if k == 0 { x0[1] } else { moving_square_k_step(&x0, k as u32) };
        println!("  x_{k} = ({:.6}, {:.6})   lower-branch formula {:.6}", x[0], x[1], formula);
    }
}
