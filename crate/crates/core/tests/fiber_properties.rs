use foldmap::demos::demo_config;
use foldmap::error::Error;
use foldmap::fibers::{
    critical_points_on_fiber, fiber_point, invert_slice, solve_preimages, trace_fiber, FoldProblem, Relation, SLICE_TOL,
};
use foldmap::linalg;
use foldmap::nonlinear::{make_convex_profile, nemitskii};
use foldmap::operators::{build_model_operator, Coefficient, ProblemSpec};
use foldmap::scenario::build_scenario;
use foldmap::verify::index_at;
use proptest::prelude::*;

const WINDOW: (f64, f64) = (-200.0, 200.0);

fn convex_problem(n: usize, a: f64, b: f64) -> FoldProblem {
    let m = build_model_operator(&ProblemSpec::DirichletLaplacian1d {
        n,
        x_min: 0.0,
        x_max: 1.0,
        potential: Coefficient::Constant(0.0),
    })
    .unwrap();
    FoldProblem::m_form(m, nemitskii(make_convex_profile(a, b, 1.0).unwrap(), n).unwrap()).unwrap()
}

fn point(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn slice_solution_is_unique(v in point(3, 5.0), start in point(3, 50.0), t in -50.0..50.0f64) {
        let p = convex_problem(3, 5.0, 15.0);
        let z = p.split.project_w(&v);
        let w0 = p.split.project_w(&start);
        let a = invert_slice(&p, &z, t, &[0.0; 3], SLICE_TOL).unwrap();
        let b = invert_slice(&p, &z, t, &w0, SLICE_TOL).unwrap();
        prop_assert!(linalg::distance(&a.w, &b.w) <= 1e-8 * (1.0 + linalg::norm2(&a.w)));
    }

    #[test]
    fn fiber_points_map_onto_the_vertical_line(v in point(3, 5.0), t in -50.0..50.0f64) {
        let p = convex_problem(3, 5.0, 15.0);
        let z = p.split.project_w(&v);
        let fp = fiber_point(&p, &z, t, &[0.0; 3], SLICE_TOL, None).unwrap();
        let u = fp.u(&p);
        let image = p.eval(&u);
        prop_assert!(linalg::distance(&p.split.project_w(&image), &z) <= 1e-8 * (1.0 + linalg::norm2(&image)));
        prop_assert!((p.split.height(&image) - fp.h).abs() <= 1e-8 * (1.0 + fp.h.abs()));
        // and conversely the solver recovers it from its image
        if fp.lambda.abs() > 1e-3 {
            let r = solve_preimages(&p, &image, WINDOW, 256, 1e-10).unwrap();
            prop_assert!(r.solutions.iter().any(|s| linalg::distance(&s.u, &u) <= 1e-6));
        }
    }

    #[test]
    fn slice_iteration_respects_the_contraction_bound(v in point(3, 5.0), t in -100.0..100.0f64) {
        let p = convex_problem(3, 5.0, 15.0);
        let c = p.contraction.unwrap();
        prop_assert!((c - 5.0 / 22.0).abs() <= 1e-12);
        let z = p.split.project_w(&v);
        let s = invert_slice(&p, &z, t, &[0.0; 3], SLICE_TOL).unwrap();
        prop_assert!(s.observed_ratio <= c + 0.05, "{} > {c}", s.observed_ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn fold_preimages_are_at_most_two_and_ordered(u in point(3, 5.0)) {
        let p = convex_problem(3, 5.0, 15.0);
        let g = p.eval(&u);
        let r = solve_preimages(&p, &g, WINDOW, 256, 1e-10).unwrap();
        prop_assert!((1..=2).contains(&r.count), "{} preimages", r.count);
        if r.count == 2 {
            let rel = r.ordering[0].relation;
            prop_assert!(matches!(rel, Relation::Less | Relation::Greater), "{rel:?}");
            let sum: i32 = r.solutions.iter().map(|s| s.index as i32).sum();
            prop_assert_eq!(sum, 0);
        }
    }

    #[test]
    fn critical_point_on_every_fiber(v in point(3, 20.0)) {
        let p = convex_problem(3, 5.0, 15.0);
        let z = p.split.project_w(&v);
        let f = trace_fiber(&p, &z, WINDOW.0, WINDOW.1, 256).unwrap();
        let cps = critical_points_on_fiber(&p, &f, 1e-10).unwrap();
        prop_assert_eq!(cps.len(), 1);
        prop_assert!(cps[0].lambda.abs() <= 1e-6, "{}", cps[0].lambda);
    }
}

#[test]
fn index_agrees_with_the_critical_value_sign() {
    let problems = [
        convex_problem(3, 5.0, 15.0),
        convex_problem(3, 15.0, 30.0),
        build_scenario(&demo_config("bnv_nonselfadjoint", true).unwrap()).unwrap().problem,
        build_scenario(&demo_config("nonlocal_gradient", true).unwrap()).unwrap().problem,
    ];
    let mut checked = 0;
    for (k, p) in problems.iter().enumerate() {
        for i in 0..50 {
            // deterministic spread of points, mostly of moderate size
            let u: Vec<f64> = (0..3)
                .map(|j| 6.0 * (((i * 3 + j + k * 7) as f64 * 0.754_877_666).fract() - 0.5) * (1.0 + (i % 5) as f64))
                .collect();
            match index_at(p, &u, 1e-9) {
                Ok(rep) => {
                    assert!(rep.consistent, "problem {k}, point {u:?}: {rep:?}");
                    checked += 1;
                }
                Err(Error::CriticalPoint(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(checked >= 190, "{checked}");
}

#[test]
fn homeomorphism_index_is_constant() {
    // profile straddling the ground value: every point has index −1
    let p = convex_problem(3, 15.0, 30.0);
    // profile below the ground value: every point has index +1
    let q = convex_problem(3, -5.0, 5.0);
    for i in 0..40 {
        let u: Vec<f64> = (0..3).map(|j| 20.0 * (((i * 3 + j) as f64 * 0.569_840_29).fract() - 0.5)).collect();
        let a = index_at(&p, &u, 1e-9).unwrap();
        assert_eq!(a.index, -1);
        assert!(a.lambda_value < 0.0);
        let b = index_at(&q, &u, 1e-9).unwrap();
        assert_eq!(b.index, 1);
        assert!(b.lambda_value > 0.0);
        for prob in [&p, &q] {
            let r = solve_preimages(prob, &prob.eval(&u), WINDOW, 256, 1e-10).unwrap();
            assert_eq!(r.count, 1);
        }
    }
}
