//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, then a single
//! assertion over all of them. Run with
//! `cargo test -p spiral-core --test acceptance -- --nocapture`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spiral_core::bench::{quantile, run_bench, BenchConfig};
use spiral_core::geometry::{circumcenter, colinearity_test, project_onto_hull, Point, DEFAULT_EPS_COL};
use spiral_core::lyapunov::{run_sweep, Checker, GraphInstance};
use spiral_core::operators::{
    iterate, lt_apply, BaseStepper, DouglasRachford, LtStepper, ProxKind, ProxOracle, SetOracle, StopRule,
};
use spiral_core::splitting::{
    admm_step, reconstruct_dual, Accel, AdmmProblem, AdmmState, BasisPursuitInstance, InstanceSpec,
};

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn criterion(id: u32, name: &'static str, limit: Duration, run: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (ok, detail) = run();
    let elapsed = t.elapsed();
    let in_time = elapsed < limit;
    let detail = format!("{detail}; {:.3}s of {}s", elapsed.as_secs_f64(), limit.as_secs());
    let passed = ok && in_time;
    println!("[{}] {id}. {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    Outcome { id, name, passed, detail }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Point {
    Point::from_vector(DVector::from_fn(d, |_, _| StandardNormal.sample(rng)))
}

fn pt(c: &[f64]) -> Point {
    Point::from_slice(c).unwrap()
}

fn two_lines_dr(theta: f64) -> DouglasRachford<SetOracle, SetOracle> {
    DouglasRachford::new(SetOracle::line_at_angle(0.0), SetOracle::line_at_angle(theta))
}

fn two_lines_finite_convergence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let theta = rng.random_range(0.05..FRAC_PI_2 - 0.05);
        let x0 = gaussian(&mut rng, 2) * rng.random_range(0.1..100.0);
        let out = lt_apply(&two_lines_dr(theta), &x0, DEFAULT_EPS_COL).unwrap();
        worst = worst.max(out.point.norm() / (1.0 + x0.norm()));
    }
    (worst <= 1e-9, format!("max |L_T x0| / (1 + |x0|) = {worst:.2e}"))
}

fn dr_rate() -> (bool, String) {
    let mut worst = 0.0f64;
    for theta in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
        let traj = iterate(&BaseStepper(two_lines_dr(theta)), pt(&[1.3, -0.4]), 50, &StopRule::StepNorm(0.0)).unwrap();
        let pts: Vec<&Point> = traj.points().collect();
        assert_eq!(pts.len(), 51);
        for w in pts.windows(2) {
            worst = worst.max((w[1].norm() / w[0].norm() - theta.cos()).abs());
        }
        let overall = (pts[50].norm() / pts[0].norm()).powf(1.0 / 50.0);
        worst = worst.max((overall - theta.cos()).abs());
    }
    (worst <= 1e-6, format!("max |ratio - cos(theta)| = {worst:.2e}"))
}

fn lyapunov_suites() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for inst in [GraphInstance::TwoLines { theta: 0.6 }, GraphInstance::ExpGraph] {
        for checker in [Checker::Spiraling, Checker::Bisectors, Checker::Mss, Checker::Newton] {
            let tol = if checker == Checker::Newton { 1e-14 } else { 1e-8 };
            let s = run_sweep(inst, checker, 200, 7, tol).unwrap();
            ok &= s.passed() && s.evaluations >= 200;
            parts.push(format!("{}/{:?} {:.1e}", s.instance, checker, s.max_residual));
        }
    }
    (ok, parts.join(", "))
}

fn reduced_dimension() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut steps = 0;
    for _ in 0..100 {
        let q = gaussian(&mut rng, 5);
        let d1 = gaussian(&mut rng, 5);
        let d2 = gaussian(&mut rng, 5);
        let a = SetOracle::line(q.clone(), &d1 * (1.0 / d1.norm())).unwrap();
        let b = SetOracle::line(q.clone(), &d2 * (1.0 / d2.norm())).unwrap();
        let hull = [q.clone(), &q + &d1, &q + &d2];
        let x0 = &q + &(&d1 * rng.random_range(-3.0..3.0)) + &d2 * rng.random_range(-3.0..3.0);
        let stepper = LtStepper { op: DouglasRachford::new(a, b), eps_col: DEFAULT_EPS_COL };
        let traj = iterate(&stepper, x0, 20, &StopRule::StepNorm(1e-14)).unwrap();
        for p in traj.points() {
            let off = p.dist(&project_onto_hull(p, &hull).unwrap());
            worst = worst.max(off);
            steps += 1;
        }
    }
    (worst <= 1e-9, format!("{steps} iterates, max distance to U = {worst:.2e}"))
}

fn primal_dual_consistency() -> (bool, String) {
    let mut worst_y = 0.0f64;
    let mut worst_lambda = 0.0f64;
    for seed in 0..20u64 {
        let c = [0.5, 1.0, 2.0][seed as usize % 3];
        let inst = BasisPursuitInstance::generate(InstanceSpec::new(100 + seed, 6, 3, c)).unwrap();
        let d2 = ProxOracle::new(ProxKind::SupportConjugateBox, c).unwrap();
        let d1 = ProxOracle::new(ProxKind::NegatedSupportOf(inst.problem.feasible_set()), c).unwrap();
        let dual_dr = DouglasRachford::new(d2, d1);
        let mut s = AdmmState::zeros(6);
        let mut y = s.dual(c).0;
        for _ in 0..50 {
            let x_next = inst.problem.x_update(&s.z, &s.lambda);
            let rec = reconstruct_dual(&s, &x_next, c);
            worst_y = worst_y.max(rec.y.0.dist(&y) / (1.0 + y.norm()));
            worst_lambda = worst_lambda.max(s.lambda.dist(&inst.problem.d2_prox(&rec.y.0)));
            s = admm_step(&inst.problem, &s);
            y = spiral_core::operators::Operator::apply(&dual_dr, &y).unwrap();
        }
        worst_y = worst_y.max(s.dual(c).0.dist(&y) / (1.0 + y.norm()));
    }
    (
        worst_y <= 1e-8 && worst_lambda <= 1e-10,
        format!("max y gap {worst_y:.2e}, max |lambda - P(y)| {worst_lambda:.2e}"),
    )
}

fn basis_pursuit_bench() -> (bool, String) {
    let cfg = BenchConfig {
        instances: 200,
        n: 30,
        nu: 10,
        c: 1.0,
        nnz: None,
        seed_base: 1,
        methods: vec![Accel::None, Accel::Lt],
        max_iter: Some(1_000_000),
    };
    let r = run_bench(&cfg).unwrap();
    let (van, lt) = (&r.stats[0], &r.stats[1]);
    let ok = van.solved_count == 200 && lt.solved_count == 200 && lt.wins >= 190.0 && lt.median * 3.0 <= van.median;
    (
        ok,
        format!(
            "solved {}/{} ; lt wins {} ; medians vanilla {} lt {} (ratio {:.3})",
            van.solved_count,
            lt.solved_count,
            lt.wins,
            van.median,
            lt.median,
            lt.median / van.median
        ),
    )
}

fn ct_failure() -> (bool, String) {
    let cfg = BenchConfig {
        instances: 20,
        n: 30,
        nu: 10,
        c: 1.0,
        nnz: None,
        seed_base: 1,
        methods: vec![Accel::None, Accel::Lt, Accel::Ct],
        max_iter: None,
    };
    let r = run_bench(&cfg).unwrap();
    let ct_capped = r.rows.iter().filter(|row| !row.outcomes[2].solved && row.outcomes[2].iterations == 100_000).count();
    let ok = r.stats[0].solved_count == 20 && r.stats[1].solved_count == 20 && ct_capped >= 18;
    (
        ok,
        format!(
            "ct capped on {ct_capped}/20 ; vanilla solved {} ; lt solved {}",
            r.stats[0].solved_count, r.stats[1].solved_count
        ),
    )
}

/// Intersection of two perpendicular bisectors in the triangle's own plane.
fn brute_force_circumcenter(a: &Point, b: &Point, c: &Point) -> Point {
    let u = b - a;
    let e1 = &u * (1.0 / u.norm());
    let v = c - a;
    let w = &v - &e1 * v.dot(&e1);
    let e2 = &w * (1.0 / w.norm());
    let (bx, by) = (u.dot(&e1), 0.0);
    let (cx, cy) = (v.dot(&e1), v.dot(&e2));
    // 2 b . p = |b|^2 and 2 c . p = |c|^2 with a at the origin
    let (m11, m12, r1) = (2.0 * bx, 2.0 * by, bx * bx + by * by);
    let (m21, m22, r2) = (2.0 * cx, 2.0 * cy, cx * cx + cy * cy);
    let det = m11 * m22 - m12 * m21;
    let px = (r1 * m22 - m12 * r2) / det;
    let py = (m11 * r2 - r1 * m21) / det;
    a + &(&e1 * px) + &e2 * py
}

fn geometry_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut eq, mut hull, mut cross) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    while count < 10_000 {
        let d = rng.random_range(2..=10);
        let (a, b, c) = (gaussian(&mut rng, d), gaussian(&mut rng, d), gaussian(&mut rng, d));
        if colinearity_test(&a, &b, &c, 1e-6).unwrap().is_colinear {
            continue;
        }
        count += 1;
        let p = circumcenter(&a, &b, &c, DEFAULT_EPS_COL).unwrap();
        let (ra, rb, rc) = (p.dist(&a), p.dist(&b), p.dist(&c));
        let scale = 1.0 + ra;
        eq = eq.max(((ra - rb).abs().max((ra - rc).abs())) / scale);
        let tri = [a.clone(), b.clone(), c.clone()];
        hull = hull.max(p.dist(&project_onto_hull(&p, &tri).unwrap()) / scale);
        cross = cross.max(p.dist(&brute_force_circumcenter(&a, &b, &c)) / scale);
    }
    let ok = eq <= 1e-9 && hull <= 1e-9 && cross <= 1e-9;
    (ok, format!("equidistance {eq:.1e}, hull {hull:.1e}, 2-D cross-check {cross:.1e}"))
}

#[test]
fn acceptance_suite() {
    let secs = Duration::from_secs;
    let outcomes = [
        criterion(1, "two-lines finite convergence of L_T", secs(1), two_lines_finite_convergence),
        criterion(2, "Douglas-Rachford rate cos(theta) on two lines", secs(1), dr_rate),
        criterion(3, "Lyapunov property suites", secs(5), lyapunov_suites),
        criterion(4, "reduced-dimension invariance in R^5", secs(1), reduced_dimension),
        criterion(5, "primal/dual consistency", secs(5), primal_dual_consistency),
        criterion(6, "basis pursuit benchmark", secs(600), basis_pursuit_bench),
        criterion(7, "C_T failure mode", secs(300), ct_failure),
        criterion(8, "geometry oracle equivalence", secs(5), geometry_oracle),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{}. {} ({})", o.id, o.name, o.detail))
        .collect();
    println!("{}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria: {failed:#?}");
}

#[test]
fn quantile_matches_sorted_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for len in 1..40 {
        let data: Vec<f64> = (0..len).map(|_| rng.random_range(0..50) as f64).collect();
        let mut sorted = data.clone();
        sorted.sort_by(f64::total_cmp);
        let med = if len % 2 == 1 { sorted[len / 2] } else { 0.5 * (sorted[len / 2 - 1] + sorted[len / 2]) };
        assert_eq!(quantile(&data, 0.5), med);
        assert_eq!(quantile(&data, 0.0), sorted[0]);
        assert_eq!(quantile(&data, 1.0), sorted[len - 1]);
    }
}
