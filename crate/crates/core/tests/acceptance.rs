//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Expected values are recomputed here independently of the library.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use projsol::algorithm::{verify_projected_solution, Outcome, OuterConfig, RunResult};
use projsol::cli::trace_csv;
use projsol::ep_solver::{grid_ep_oracle, solve_ep, InnerConfig, InnerMethod};
use projsol::geometry::{sample_point, vector, ConvexSet, Halfspace, Vector, DEFAULT_TOL};
use projsol::instances::{make_contraction_fixture, make_counterexample, make_l2_truncated, make_moving_square};
use projsol::problems::{gt_eval, Bifunction, SetValuedOperator};

// criterion 1
const CYCLE_GAP_TOL: f64 = 1e-12;
const CERT_EPS: f64 = 1e-6;
// criterion 2
const K_STEP_TOL: f64 = 1e-9;
// criterion 3
const L2_SOLUTION_TOL: f64 = 1e-8;
const L2_LIMIT_TOL: f64 = 0.02;
const L2_MAX_STEPS: usize = 2;
const L2_STARTS: usize = 5;
// criterion 4
const AGREEMENT_SAMPLES: usize = 50;
const EXTRAGRADIENT_TOL: f64 = 1e-6;
const AGREEMENT_GRID: f64 = 0.01;
// criterion 5
const CONTRACTION_SLACK: f64 = 1e-6;
// criterion 6
const ORACLE_GRID: f64 = 0.05;
// criterion 7
const PROPERTY_CASES: usize = 200;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(inst: &projsol::instances::ProblemInstance, x0: &Vector) -> Result<RunResult, String> {
    inst.procedure().run(x0, &OuterConfig::default()).map_err(|e| e.to_string())
}

fn criterion_1() -> Check {
    let inst = make_counterexample();
    let x0 = vector(&[0.5, 0.0]);
    let r = run(&inst, &x0)?;
    ensure(r.outcome == Outcome::Cycling(2), || format!("outcome {:?}", r.outcome))?;
    for (i, x) in r.trace.xs.iter().enumerate() {
        let expected = if i % 2 == 0 { vector(&[0.5, 0.0]) } else { vector(&[-0.5, 0.0]) };
        ensure(*x == expected, || format!("x_{i} = {x:?}"))?;
    }
    for (i, z) in r.trace.zs.iter().enumerate() {
        let expected = if i % 2 == 0 { vector(&[-0.5, 1.0]) } else { vector(&[0.5, 1.0]) };
        ensure(*z == expected, || format!("z_{i} = {z:?}"))?;
    }
    ensure(r.trace.gaps.iter().all(|g| (g - 1.0).abs() <= CYCLE_GAP_TOL), || "gap differs from 1".into())?;
    let cycled = r.trace.xs.len();

    let origin = vector(&[0.0, 0.0]);
    let r = run(&inst, &origin)?;
    let Outcome::Converged(cert) = &r.outcome else { return Err(format!("origin: {:?}", r.outcome)) };
    ensure(cert.x == origin && cert.z == vector(&[0.0, 1.0]), || format!("certificate at {:?}", cert.x))?;
    let again = verify_projected_solution(&inst.qep, &origin, &cert.z, CERT_EPS, &InnerConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(again.valid, || "certificate invalid".into())?;
    Ok(format!("Cycling(2) over {} iterates, origin certified", cycled))
}

/// Second coordinate of `x_k` in the lower branch, written out directly.
fn k_step(x0: &[f64; 2], k: i32) -> f64 {
    2f64.powi(k) * x0[1] / (x0[0].powi(2) + (4f64.powi(k) - 1.0) / 3.0 * x0[1].powi(2)).sqrt()
}

fn criterion_2() -> Check {
    let inst = make_moving_square();
    for p in [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
        let x0 = vector(&p);
        let r = run(&inst, &x0)?;
        let Outcome::Converged(cert) = &r.outcome else { return Err(format!("{p:?}: {:?}", r.outcome)) };
        ensure(r.trace.zs.len() <= 1, || format!("{p:?}: {} steps", r.trace.zs.len()))?;
        ensure((&cert.x - &x0).norm() <= K_STEP_TOL, || format!("{p:?}: ended at {:?}", cert.x))?;
        ensure((r.trace.xs.last().unwrap() - &x0).norm() <= K_STEP_TOL, || format!("{p:?}: moved"))?;
    }

    let start = [1.0, 0.2];
    let threshold = 3f64.sqrt() / 3.0;
    let k0 = (1..).find(|&k| k_step(&start, k) >= threshold).unwrap();
    let r = run(&inst, &vector(&start))?;
    ensure(matches!(r.outcome, Outcome::Converged(_)), || format!("{:?}", r.outcome))?;
    for k in 1..=k0 {
        let x = &r.trace.xs[k as usize];
        ensure((x[0] - 1.0).abs() <= K_STEP_TOL && (x[1] - k_step(&start, k)).abs() <= K_STEP_TOL, || {
            format!("x_{k} = {x:?}, formula gives (1, {})", k_step(&start, k))
        })?;
    }
    // x_{k0} already lies in the middle branch, so the next step lands on (1,1)
    let reached = (k0 + 1) as usize;
    ensure((&r.trace.xs[reached] - vector(&[1.0, 1.0])).norm() <= K_STEP_TOL, || format!("x_{reached} not (1,1)"))?;
    ensure(reached == 3, || format!("reached (1,1) at index {reached}"))?;
    ensure(r.trace.xs[..reached].iter().all(|x| (x - vector(&[1.0, 1.0])).norm() > K_STEP_TOL), || "reached (1,1) early".into())?;
    Ok(format!("fixed starts stay put; (1,0.2) follows the formula to k0 = {k0} and x_3 = (1,1)"))
}

fn criterion_3() -> Check {
    let mut norms = Vec::new();
    for n in [2usize, 4, 16, 64] {
        let inst = make_l2_truncated(n).map_err(|e| e.to_string())?;
        let w_norm = (1..=n).map(|k| 1.0 / (k * k) as f64).sum::<f64>().sqrt();
        let target = Vector::from_fn(n, |k, _| 1.0 / ((k + 1) as f64 * w_norm));
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for s in 0..L2_STARTS {
            let x0 = sample_point(inst.domain(), &mut rng).map_err(|e| e.to_string())?;
            let r = run(&inst, &x0)?;
            let Outcome::Converged(cert) = &r.outcome else { return Err(format!("n={n} start {s}: {:?}", r.outcome)) };
            ensure(r.trace.zs.len() <= L2_MAX_STEPS, || format!("n={n} start {s}: {} steps", r.trace.zs.len()))?;
            ensure((&cert.x - &target).norm() <= L2_SOLUTION_TOL, || format!("n={n} start {s}: off target"))?;
        }
        norms.push(w_norm);
    }
    ensure(norms.windows(2).all(|w| w[0] < w[1]), || format!("norms not increasing: {norms:?}"))?;
    let limit = std::f64::consts::PI / 6f64.sqrt();
    let last = *norms.last().unwrap();
    ensure((last - limit).abs() <= L2_LIMIT_TOL, || format!("|w| at n=64 is {last}"))?;
    ensure(norms.iter().all(|&v| v < limit), || "norm above the limit".into())?;
    Ok(format!("20 runs converged in <= 2 steps; |w| = {norms:.6?} -> {limit:.5}"))
}

fn criterion_4() -> Check {
    let inst = make_moving_square();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let extragradient = InnerConfig { method: InnerMethod::Extragradient, ..InnerConfig::default() };
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..AGREEMENT_SAMPLES {
        let x = sample_point(inst.domain(), &mut rng).map_err(|e| e.to_string())?;
        let k = inst.qep.map.eval(&x).map_err(|e| e.to_string())?;
        let exact = &x * (2.0 / x.norm());
        let f = inst.qep.f.bind(&x);
        let eg = solve_ep(&f, &k, &extragradient, None).map_err(|e| e.to_string())?;
        let d_eg = (&eg.point - &exact).norm();
        ensure(d_eg <= EXTRAGRADIENT_TOL, || format!("sample {i}: extragradient off by {d_eg:e}"))?;
        let grid = grid_ep_oracle(&f, &k, AGREEMENT_GRID).map_err(|e| e.to_string())?;
        let h = exact.norm();
        let d_grid = (&grid.point - &exact).norm();
        ensure(d_grid <= EXTRAGRADIENT_TOL + AGREEMENT_GRID * h, || format!("sample {i}: grid off by {d_grid:e}"))?;
        worst = (worst.0.max(d_eg), worst.1.max(d_grid));
    }
    Ok(format!("{AGREEMENT_SAMPLES} samples; worst extragradient {:.2e}, grid {:.2e}", worst.0, worst.1))
}

fn criterion_5() -> Check {
    let mut summary = Vec::new();
    for q in [0.3, 0.5, 0.9] {
        let inst = make_contraction_fixture(q, 2).map_err(|e| e.to_string())?;
        let x0 = vector(&[-1.0, 0.5]);
        let r = run(&inst, &x0)?;
        ensure(matches!(r.outcome, Outcome::Converged(_)), || format!("q={q}: {:?}", r.outcome))?;
        let gaps = &r.trace.gaps;
        for (i, g) in gaps.iter().enumerate() {
            let bound = q.powi(i as i32) * gaps[0] * (1.0 + CONTRACTION_SLACK);
            ensure(*g <= bound, || format!("q={q}: gap {i} = {g:e} above {bound:e}"))?;
        }
        let initial = (&x0 - &r.trace.zs[0]).norm();
        let xs = &r.trace.xs;
        for m in 0..xs.len() {
            let bound = q.powi(m as i32) / (1.0 - q) * initial * (1.0 + CONTRACTION_SLACK);
            for n in m + 1..xs.len() {
                let d = (&xs[m] - &xs[n]).norm();
                ensure(d <= bound, || format!("q={q}: |x_{m} - x_{n}| = {d:e} above {bound:e}"))?;
            }
        }
        summary.push(format!("q={q}: {} steps", gaps.len()));
    }
    Ok(summary.join(", "))
}

fn clusters_match(points: &[Vector], expected: &[Vector], cell: f64) -> Result<(), String> {
    for p in points {
        ensure(expected.iter().any(|e| (p - e).norm() <= cell), || format!("spurious point {p:?}"))?;
    }
    for e in expected {
        ensure(points.iter().any(|p| (p - e).norm() <= cell), || format!("no point near {e:?}"))?;
    }
    Ok(())
}

fn criterion_6() -> Check {
    let cell = ORACLE_GRID * 2f64.sqrt();
    let cfg = InnerConfig::default();
    let counter = make_counterexample();
    let found = projsol::algorithm::fixed_point_oracle(&counter.procedure(), ORACLE_GRID, CERT_EPS, &cfg)
        .map_err(|e| e.to_string())?;
    clusters_match(&found, &[vector(&[0.0, 0.0])], cell)?;
    let square = make_moving_square();
    let found_sq = projsol::algorithm::fixed_point_oracle(&square.procedure(), ORACLE_GRID, CERT_EPS, &cfg)
        .map_err(|e| e.to_string())?;
    clusters_match(&found_sq, &[vector(&[1.0, 0.0]), vector(&[1.0, 1.0]), vector(&[0.0, 1.0])], cell)?;
    Ok(format!("{} and {} grid points, all within one cell of the known solutions", found.len(), found_sq.len()))
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vector {
    Vector::from_fn(dim, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

fn property_sets() -> Vec<ConvexSet> {
    let triangle = ConvexSet::polytope(vec![
        Halfspace::new(vector(&[1.0, 0.0]), 1.0),
        Halfspace::new(vector(&[-1.0, 0.0]), 0.0),
        Halfspace::new(vector(&[0.0, 1.0]), 1.0),
        Halfspace::new(vector(&[0.0, -1.0]), 0.0),
        Halfspace::new(vector(&[-1.0, -1.0]), -1.0),
    ])
    .unwrap();
    vec![
        ConvexSet::new_box(vector(&[-1.0, 0.0]), vector(&[0.5, 2.0])).unwrap(),
        ConvexSet::ball(vector(&[0.3, -0.2]), 0.7).unwrap(),
        triangle,
        ConvexSet::segment(vector(&[-1.0, 0.0]), vector(&[1.0, 0.5])).unwrap(),
        ConvexSet::orthant_ball(2, 1.0).unwrap(),
        ConvexSet::cube(2, 0.0, 1.0).unwrap().translate(vector(&[2.0, -1.0])).unwrap(),
        ConvexSet::cube(2, 0.0, 1.0).unwrap().minkowski_sum(ConvexSet::ball(vector(&[0.0, 0.0]), 0.25).unwrap()).unwrap(),
    ]
}

fn geometry_properties() -> Result<String, String> {
    let sets = property_sets();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..PROPERTY_CASES {
        let set = &sets[case % sets.len()];
        let x = random_point(&mut rng, 2, 4.0);
        let y = random_point(&mut rng, 2, 4.0);
        let px = set.project(&x, DEFAULT_TOL).map_err(|e| e.to_string())?.point;
        let py = set.project(&y, DEFAULT_TOL).map_err(|e| e.to_string())?.point;
        let ppx = set.project(&px, DEFAULT_TOL).map_err(|e| e.to_string())?.point;
        ensure((&ppx - &px).norm() <= 1e-7, || format!("case {case}: not idempotent"))?;
        ensure((&px - &py).norm() <= (&x - &y).norm() + 1e-7, || format!("case {case}: expansive"))?;
        // <x - P(x), c - P(x)> <= 0 for points c of the set
        for _ in 0..5 {
            let c = sample_point(set, &mut rng).map_err(|e| e.to_string())?;
            let v = (&x - &px).dot(&(&c - &px));
            ensure(v <= 1e-7, || format!("case {case}: variational inequality violated by {v:e}"))?;
        }
    }
    Ok(format!("{PROPERTY_CASES} cases over {} sets", sets.len()))
}

fn problem_properties() -> Result<String, String> {
    let op = SetValuedOperator::new(2, |x| Ok(ConvexSet::ball(x * 0.5, 0.3 + 0.1 * x[0].abs())?));
    let boxed = SetValuedOperator::new(2, |x| {
        Ok(ConvexSet::new_box(x * 0.2 - vector(&[0.5, 0.5]), x * 0.2 + vector(&[0.5, 0.25]))?)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..PROPERTY_CASES {
        let t = if case % 2 == 0 { &op } else { &boxed };
        let f = Bifunction::operator_sup(t.clone());
        let x = random_point(&mut rng, 2, 2.0);
        let y1 = random_point(&mut rng, 2, 2.0);
        let y2 = random_point(&mut rng, 2, 2.0);
        let s: f64 = rng.random();
        let g = |y: &Vector| gt_eval(t, &x, y).map_err(|e| e.to_string());
        let mid = &y1 * s + &y2 * (1.0 - s);
        ensure(g(&mid)? <= s * g(&y1)? + (1.0 - s) * g(&y2)? + 1e-12, || format!("case {case}: not convex"))?;
        ensure(g(&x)? == 0.0, || format!("case {case}: nonzero diagonal"))?;
        let h = f.lipschitz_in_y(&x).map_err(|e| e.to_string())?.ok_or("no modulus")?;
        ensure((g(&y1)? - g(&y2)?).abs() <= h * (&y1 - &y2).norm() + 1e-12, || format!("case {case}: h bound"))?;
    }
    Ok(format!("{PROPERTY_CASES} cases"))
}

fn algorithm_properties() -> Result<String, String> {
    let instances = [
        make_moving_square(),
        make_l2_truncated(3).unwrap(),
        make_contraction_fixture(0.6, 2).unwrap(),
        make_counterexample(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut converged = 0;
    for case in 0..PROPERTY_CASES {
        let inst = &instances[case % instances.len()];
        let x0 = sample_point(inst.domain(), &mut rng).map_err(|e| e.to_string())?;
        let a = run(inst, &x0)?;
        for (i, z) in a.trace.zs.iter().enumerate() {
            let back = inst.domain().project(z, DEFAULT_TOL).map_err(|e| e.to_string())?.point;
            ensure(back == a.trace.xs[i + 1], || format!("case {case}: trace step {i} not reproduced"))?;
        }
        if let Outcome::Converged(cert) = &a.outcome {
            converged += 1;
            let check = verify_projected_solution(&inst.qep, &cert.x, &cert.z, CERT_EPS, &InnerConfig::default())
                .map_err(|e| e.to_string())?;
            ensure(check.valid, || format!("case {case}: converged without a valid certificate"))?;
        }
        let b = run(inst, &x0)?;
        let dim = inst.dim();
        ensure(trace_csv(&a.trace, dim) == trace_csv(&b.trace, dim), || format!("case {case}: traces differ"))?;
    }
    Ok(format!("{PROPERTY_CASES} runs, {converged} converged and certified, traces byte-identical"))
}

fn criterion_7() -> Check {
    let g = geometry_properties().map_err(|e| format!("geometry: {e}"))?;
    let p = problem_properties().map_err(|e| format!("problems: {e}"))?;
    let a = algorithm_properties().map_err(|e| format!("algorithm: {e}"))?;
    Ok(format!("geometry {g}; problems {p}; algorithm {a}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 counterexample cycling", criterion_1, Duration::from_secs(1)),
        ("2 moving-square reproduction", criterion_2, Duration::from_secs(1)),
        ("3 l2-truncated convergence", criterion_3, Duration::from_secs(5)),
        ("4 inner-solver agreement", criterion_4, Duration::from_secs(30)),
        ("5 contraction bound", criterion_5, Duration::from_secs(1)),
        ("6 oracle equivalence", criterion_6, Duration::from_secs(10)),
        ("7 property suites", criterion_7, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("took {elapsed:.2?}, limit {limit:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS criterion {name} ({elapsed:.2?}): {detail}"),
            Err(reason) => {
                failures += 1;
                println!("FAIL criterion {name} ({elapsed:.2?}): {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 7 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
