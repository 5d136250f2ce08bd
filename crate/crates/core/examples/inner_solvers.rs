//! The three inner solvers on the same equilibrium problem.

use projsol::ep_solver::{grid_ep_oracle, solve_ep, solve_vi_extragradient, InnerConfig, InnerMethod};
use projsol::geometry::vector;
use projsol::instances::make_moving_square;

fn main() {
    let inst = make_moving_square();
    let x = vector(&[0.8, 0.6]);
    let k = inst.qep.map.eval(&x).expect("constraint set");
    let f = inst.qep.f.bind(&x);
    let exact = inst.solution_map(&x).unwrap();
    let cfg = InnerConfig::default();

    let closed = solve_ep(&f, &k, &cfg, Some(&exact)).expect("closed form");
    let eg = solve_ep(&f, &k, &InnerConfig { method: InnerMethod::Extragradient, ..cfg.clone() }, None).expect("extragradient");
    let grid = grid_ep_oracle(&f, &k, 0.01).expect("grid");
    // the same VI posed directly through its field
    let direct = solve_vi_extragradient(|y| y.clone(), &k, &cfg).expect("vi");

    for (name, s) in [("closed form", &closed), ("extragradient", &eg), ("grid 0.01", &grid), ("direct VI", &direct)] {
        println!(
            "{name:<14} z = ({:.6}, {:.6})  residual {:+.2e}  iterations {}",
            s.point[0], s.point[1], s.residual, s.inner_iterations
        );
    }
}
