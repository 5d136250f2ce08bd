//! Linear convergence when the solution map contracts: gaps shrink like
//! `q^i` and the iterates stay inside the Cauchy bound.

use projsol::algorithm::{cauchy_bound, gap_bound, OuterConfig};
use projsol::instances::make_contraction_fixture;

fn main() {
    for q in [0.3, 0.5, 0.9] {
        let inst = make_contraction_fixture(q, 2).expect("fixture");
        let x0 = inst.known_behaviors[0].x0.clone();
        let run = inst.procedure().run(&x0, &OuterConfig::default()).expect("run");
        let gaps = &run.trace.gaps;
        let worst = gaps
            .iter()
            .enumerate()
            .map(|(i, g)| g / gap_bound(q, i, gaps[0]))
            .fold(0.0, f64::max);
        let initial = (&x0 - &run.trace.zs[0]).norm();
        let tail = (&run.trace.xs[1] - run.trace.xs.last().unwrap()).norm();
        println!(
            "q = {q}: {} steps, max gap / bound = {worst:.3}, |x_1 - x_end| = {tail:.3e} <= {:.3e}",
            gaps.len(),
            cauchy_bound(q, 1, initial).unwrap()
        );
    }
}
