use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use spiral_core::geometry::{circumcenter, colinearity_test, project_onto_hull, Point, DEFAULT_EPS_COL};
use spiral_core::lyapunov::{grad_v, GraphLyapunov};
use spiral_core::operators::{
    lt_apply, shrinkage, AffineSystem, DouglasRachford, ProxKind, ProxOracle, SetOracle,
};
use spiral_core::splitting::{admm_step, AdmmProblem, AdmmState, BasisPursuitInstance, InstanceSpec};

fn point(d: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-10.0..10.0f64, d).prop_map(|v| Point::new(v).unwrap())
}

fn triple() -> impl Strategy<Value = (Point, Point, Point)> {
    (2usize..=6).prop_flat_map(|d| (point(d), point(d), point(d)))
}

fn well_shaped(a: &Point, b: &Point, c: &Point) -> bool {
    !colinearity_test(a, b, c, 1e-4).unwrap().is_colinear
}

fn sets(d: usize) -> impl Strategy<Value = SetOracle> {
    prop_oneof![
        (point(d), -5.0..5.0f64)
            .prop_filter("nonzero normal", |(n, _)| n.norm() > 1e-3)
            .prop_map(|(n, o)| SetOracle::hyperplane(n, o).unwrap()),
        (point(d), point(d))
            .prop_filter("nonzero direction", |(_, u)| u.norm() > 1e-3)
            .prop_map(|(a, u)| { let n = u.norm(); SetOracle::line(a, u * (1.0 / n)).unwrap() }),
        (point(d), 0.1..5.0f64).prop_map(|(c, r)| SetOracle::sphere(c, r).unwrap()),
        Just(SetOracle::inf_ball(d)),
    ]
}

proptest! {
    #[test]
    fn circumcenter_is_equidistant_and_in_hull((a, b, c) in triple()) {
        prop_assume!(well_shaped(&a, &b, &c));
        let p = circumcenter(&a, &b, &c, DEFAULT_EPS_COL).unwrap();
        let r = p.dist(&a);
        prop_assert!((p.dist(&b) - r).abs() <= 1e-8 * (1.0 + r));
        prop_assert!((p.dist(&c) - r).abs() <= 1e-8 * (1.0 + r));
        let hull = [a.clone(), b.clone(), c.clone()];
        prop_assert!(p.dist(&project_onto_hull(&p, &hull).unwrap()) <= 1e-8 * (1.0 + r));
    }

    #[test]
    fn circumcenter_is_permutation_invariant((a, b, c) in triple()) {
        prop_assume!(well_shaped(&a, &b, &c));
        let p = circumcenter(&a, &b, &c, DEFAULT_EPS_COL).unwrap();
        let tol = 1e-8 * (1.0 + p.dist(&a));
        for q in [
            circumcenter(&b, &a, &c, DEFAULT_EPS_COL).unwrap(),
            circumcenter(&c, &b, &a, DEFAULT_EPS_COL).unwrap(),
            circumcenter(&b, &c, &a, DEFAULT_EPS_COL).unwrap(),
        ] {
            prop_assert!(p.dist(&q) <= tol);
        }
    }

    #[test]
    fn circumcenter_commutes_with_translation_and_scaling(
        (a, b, c) in triple(),
        s in 0.1..10.0f64,
        shift in -5.0..5.0f64,
    ) {
        prop_assume!(well_shaped(&a, &b, &c));
        let map = |p: &Point| p.map(|v| s * v + shift);
        let p = circumcenter(&a, &b, &c, DEFAULT_EPS_COL).unwrap();
        let q = circumcenter(&map(&a), &map(&b), &map(&c), DEFAULT_EPS_COL).unwrap();
        prop_assert!(q.dist(&map(&p)) <= 1e-7 * (1.0 + s * p.dist(&a) + shift.abs()));
    }

    #[test]
    fn colinearity_is_symmetric((a, b, c) in triple()) {
        let base = colinearity_test(&a, &b, &c, DEFAULT_EPS_COL).unwrap().is_colinear;
        for perm in [(&b, &a, &c), (&a, &c, &b), (&c, &b, &a), (&b, &c, &a), (&c, &a, &b)] {
            prop_assert_eq!(colinearity_test(perm.0, perm.1, perm.2, DEFAULT_EPS_COL).unwrap().is_colinear, base);
        }
    }

    #[test]
    fn points_on_a_line_are_colinear(a in point(4), u in point(4), s in -5.0..5.0f64, t in -5.0..5.0f64) {
        prop_assume!(u.norm() > 1e-2 && (s - t).abs() > 1e-3 && s.abs() > 1e-3 && t.abs() > 1e-3);
        prop_assert!(colinearity_test(&a, &a.axpy(s, &u), &a.axpy(t, &u), DEFAULT_EPS_COL).unwrap().is_colinear);
    }

    #[test]
    fn projection_is_idempotent(s in sets(3), p in point(3)) {
        let q = s.project(&p).unwrap();
        let qq = s.project(&q).unwrap();
        prop_assert!(q.dist(&qq) <= 1e-10 * (1.0 + q.norm()));
    }

    #[test]
    fn affine_reflection_is_an_involution(s in sets(3), p in point(3)) {
        prop_assume!(!matches!(s, SetOracle::Sphere { .. } | SetOracle::InfBall { .. }));
        let back = s.reflect(&s.reflect(&p).unwrap()).unwrap();
        prop_assert!(back.dist(&p) <= 1e-10 * (1.0 + p.norm()));
    }

    #[test]
    fn convex_projection_is_firmly_nonexpansive(
        s in sets(3).prop_filter("convex", |s| !matches!(s, SetOracle::Sphere { .. })),
        p in point(3),
        q in point(3),
    ) {
        let (pp, pq) = (s.project(&p).unwrap(), s.project(&q).unwrap());
        let lhs = pp.dist(&pq).powi(2);
        let rhs = (&pp - &pq).dot(&(&p - &q));
        prop_assert!(lhs <= rhs + 1e-9 * (1.0 + p.norm() + q.norm()).powi(2));
    }

    #[test]
    fn dr_is_firmly_nonexpansive_for_convex_sets(
        a in sets(3).prop_filter("convex", |s| !matches!(s, SetOracle::Sphere { .. })),
        b in sets(3).prop_filter("convex", |s| !matches!(s, SetOracle::Sphere { .. })),
        p in point(3),
        q in point(3),
    ) {
        use spiral_core::operators::Operator;
        let t = DouglasRachford::new(a, b);
        let (tp, tq) = (t.apply(&p).unwrap(), t.apply(&q).unwrap());
        let lhs = tp.dist(&tq).powi(2);
        let rhs = (&tp - &tq).dot(&(&p - &q));
        prop_assert!(lhs <= rhs + 1e-8 * (1.0 + p.norm() + q.norm()).powi(2));
    }

    #[test]
    fn lt_solves_two_lines_in_one_step(theta in 0.05..(std::f64::consts::FRAC_PI_2 - 0.05), p in point(2)) {
        let t = DouglasRachford::new(SetOracle::line_at_angle(0.0), SetOracle::line_at_angle(theta));
        let out = lt_apply(&t, &p, DEFAULT_EPS_COL).unwrap();
        prop_assert!(out.point.norm() <= 1e-9 * (1.0 + p.norm()));
    }

    #[test]
    fn shrinkage_is_the_l1_prox(v in point(5), kappa in 0.0..3.0f64) {
        let s = shrinkage(&v, kappa);
        for (si, vi) in s.as_slice().iter().zip(v.as_slice()) {
            // optimality: v - s in kappa * subdifferential of |.| at s
            let g = vi - si;
            if *si == 0.0 {
                prop_assert!(g.abs() <= kappa + 1e-12);
            } else {
                prop_assert!((g - kappa * si.signum()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn box_and_l1_prox_obey_moreau(v in point(5), c in 0.1..4.0f64) {
        // prox_{c |.|_1}(v) + c P_box(v / c) = v
        let l1 = ProxOracle::new(ProxKind::L1Norm, c).unwrap().prox(&v).unwrap();
        let b = ProxOracle::new(ProxKind::SupportConjugateBox, c).unwrap().prox(&(&v * (1.0 / c))).unwrap();
        prop_assert!((&l1 + &b * c).dist(&v) <= 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn admm_iterates_stay_feasible(seed in 0u64..500, c in 0.3..3.0f64) {
        let inst = BasisPursuitInstance::generate(InstanceSpec::new(seed, 12, 4, c)).unwrap();
        let scale = 1.0 + inst.problem.affine().rhs().norm();
        let mut s = AdmmState::zeros(12);
        for _ in 0..30 {
            s = admm_step(&inst.problem, &s);
            prop_assert!(inst.problem.constraint_residual(&s.x) <= 1e-9 * scale);
            prop_assert!(inst.problem.d2_prox(&s.dual(c).0).dist(&s.lambda) <= 1e-10);
        }
    }
}

/// Simpson's rule for `F(y) = int_0^y f / f'`.
fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(a + i as f64 * h);
    }
    acc * h / 3.0
}

proptest! {
    #[test]
    fn grad_v_matches_finite_difference_of_quadrature(y in -3.0..3.0f64, rho in -3.0..3.0f64) {
        let l = GraphLyapunov::exp_graph();
        let ratio = |t: f64| (t.exp_m1()) / t.exp();
        let v = |y: f64, rho: f64| simpson(ratio, 0.0, y, 400) + 0.5 * rho * rho;
        let h = 1e-4;
        let dy = (v(y + h, rho) - v(y - h, rho)) / (2.0 * h);
        let drho = (v(y, rho + h) - v(y, rho - h)) / (2.0 * h);
        let g = grad_v(&l, &Point::from_slice(&[y, rho]).unwrap()).unwrap();
        prop_assert!((g[0] - dy).abs() <= 1e-6, "{} vs {}", g[0], dy);
        prop_assert!((g[1] - drho).abs() <= 1e-6);
    }
}

#[test]
fn affine_projection_matches_normal_equations() {
    let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 3.0, 1.0]);
    let b = DVector::from_vec(vec![1.0, -2.0]);
    let sys = AffineSystem::new(a.clone(), b.clone()).unwrap();
    let p = Point::from_slice(&[0.3, -1.0, 2.0, 4.0]).unwrap();
    let q = sys.project(&p);
    // q - p lies in the row space and A q = b
    let lam = (&a * a.transpose()).lu().solve(&(&b - &a * p.vector())).unwrap();
    let expected = p.vector() + a.transpose() * lam;
    for i in 0..4 {
        assert_abs_diff_eq!(q[i], expected[i], epsilon = 1e-12);
    }
}
