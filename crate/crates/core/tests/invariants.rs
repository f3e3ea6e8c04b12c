//! Property tests through the public API.

use std::f64::consts::TAU;

use nalgebra::DVector;
use proptest::prelude::*;
use rgne_core::dynamics::{run_dynamics, IntegratorConfig};
use rgne_core::game::{worst_case_term, BoxSet, CommGraph, CostModel, DemandResponse, Ellipsoid, SupportFunction, UncertainGame};
use rgne_core::polytope::{angular_metric, delta_bound, hausdorff_to_ellipsoid, inscribe_regular, refine_step, PlayerBoundInput, Polytope, Spacing};
use rgne_core::transform::{BudgetSplit, ExtendedGame};

fn ellipse() -> impl Strategy<Value = Ellipsoid> {
    (-3.0..3.0f64, -3.0..3.0f64, 0.3..4.0f64, 0.3..4.0f64)
        .prop_map(|(cx, cy, a, b)| Ellipsoid::ellipse(a, b, cx, cy).unwrap())
}

fn point(lo: f64, hi: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(lo..hi, 2).prop_map(DVector::from_vec)
}

fn two_player_game(e: Ellipsoid) -> UncertainGame {
    UncertainGame::new(
        vec![BoxSet::uniform(2, -5.0, 5.0).unwrap(), BoxSet::uniform(2, -5.0, 5.0).unwrap()],
        CostModel::DemandResponse(DemandResponse::staggered(2, 2)),
        vec![e.clone().into(), e.into()],
        2.0,
        CommGraph::path(2).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inscribed_vertices_sit_on_the_boundary(e in ellipse(), v in 3usize..40, phase in 0.0..TAU, arc in any::<bool>()) {
        let spacing = if arc { Spacing::ArcLength } else { Spacing::ParameterAngle };
        let p = inscribe_regular(&e, v, phase, spacing).unwrap();
        for x in p.vertices() {
            prop_assert!(e.membership_residual(x).abs() < 1e-9);
        }
        for r in 0..p.facet_count() {
            prop_assert!((p.normal(r).norm() - 1.0).abs() < 1e-12);
        }
        for k in 0..64 {
            let t = k as f64 * TAU / 64.0;
            let u = DVector::from_vec(vec![t.cos(), t.sin()]);
            prop_assert!(p.support(&u).unwrap() <= e.support(&u).unwrap() + 1e-9);
        }
    }

    #[test]
    fn refinement_adds_a_vertex_and_never_increases_h(e in ellipse(), phase in 0.0..TAU) {
        let mut p = inscribe_regular(&e, 3, phase, Spacing::ParameterAngle).unwrap();
        // the polytope only grows, so h cannot increase (the facet gap itself may)
        let mut h = hausdorff_to_ellipsoid(&e, &p, 2048).unwrap();
        for _ in 0..12 {
            let Some(step) = refine_step(&e, &p).unwrap() else { break };
            prop_assert!(step.polytope.vertex_count() == p.vertex_count() + 1);
            for w in p.vertices() {
                prop_assert!(step.polytope.contains(w, 1e-9));
            }
            let next = hausdorff_to_ellipsoid(&e, &step.polytope, 2048).unwrap();
            prop_assert!(next <= h + 1e-9, "{} -> {}", h, next);
            h = next;
            p = step.polytope;
        }
    }

    #[test]
    fn worst_case_term_is_convex(e in ellipse(), x in point(-5.0, 5.0), y in point(-5.0, 5.0)) {
        let m = (&x + &y) * 0.5;
        let f = |p: &DVector<f64>| worst_case_term(&e, p).unwrap();
        prop_assert!(f(&m) <= 0.5 * (f(&x) + f(&y)) + 1e-10);
    }

    #[test]
    fn omega_points_certify_the_polytope_constraint(e in ellipse(), v in 3usize..9, z in prop::collection::vec(-10.0..10.0f64, 11)) {
        // any z in Omega has d^T sigma >= max over the polytope of w^T x
        let g = two_player_game(e.clone());
        let p = inscribe_regular(&e, v, 0.3, Spacing::ParameterAngle).unwrap();
        let eg = ExtendedGame::new(&g, vec![p.clone(), p.clone()], BudgetSplit::Equal).unwrap();
        let zi = eg.project_omega(0, &DVector::from_iterator(2 + v, z.into_iter().take(2 + v))).unwrap();
        let x = zi.rows(0, 2).into_owned();
        let worst = p.vertices().iter().map(|w| w.dot(&x)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(eg.load(0, &zi) >= worst - 1e-7);
    }

    #[test]
    fn delta_is_linear_in_theta_and_r(theta in 0.0..1.0f64, r in 0.1..50.0f64, s in 0.1..10.0f64) {
        let input = |t: f64| PlayerBoundInput { facets: 6, theta: t, hausdorff: 0.1, curvature: 1.0, constant: 1.0 };
        let base = delta_bound(&[input(theta), input(0.5)], r).unwrap().angular;
        let scaled_r = delta_bound(&[input(theta), input(0.5)], s * r).unwrap().angular;
        prop_assert!((scaled_r - s * base).abs() <= 1e-9 * scaled_r.abs().max(1.0));
        let a = delta_bound(&[input(0.0), input(0.5)], r).unwrap().angular;
        let b = delta_bound(&[input(1.0), input(0.5)], r).unwrap().angular;
        prop_assert!((base - (a + theta * (b - a))).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn laplacian_kills_constants(n in 2usize..12) {
        for g in [CommGraph::ring(n).unwrap(), CommGraph::path(n).unwrap(), CommGraph::complete(n).unwrap()] {
            prop_assert!(g.laplacian_apply(&DVector::from_element(n, 1.0)).amax() < 1e-12);
            prop_assert!(g.algebraic_connectivity().unwrap() > 0.0);
        }
    }
}

#[test]
fn angle_to_the_doubled_polygon_shrinks() {
    let e = Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap();
    let polygon = |v| inscribe_regular(&e, v, 0.0, Spacing::ParameterAngle).unwrap();
    let theta: Vec<f64> = [4, 8, 16, 32].iter().map(|v| angular_metric(&polygon(*v), &polygon(2 * v)).unwrap().theta).collect();
    assert!(theta.windows(2).all(|w| w[1] < w[0]), "{theta:?}");
}

#[test]
fn recorded_states_stay_feasible() {
    let e = Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap();
    let g = two_player_game(e.clone());
    let polys: Vec<Polytope> = (0..2).map(|_| inscribe_regular(&e, 5, 0.1, Spacing::ParameterAngle).unwrap()).collect();
    let eg = ExtendedGame::new(&g, polys.clone(), BudgetSplit::Equal).unwrap();
    let cfg = IntegratorConfig { record_stride: 1, ..Default::default() };
    let traj = run_dynamics(&eg, &eg.default_init().unwrap(), &cfg).unwrap();
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    for s in &traj.states {
        assert!(s.lambda.min() >= 0.0);
        for (i, z) in s.z.iter().enumerate() {
            assert!(eg.omega_residual(i, z) < 1e-8);
        }
    }

    // construction is deterministic
    let again = ExtendedGame::new(&g, polys, BudgetSplit::Equal).unwrap();
    assert_eq!(again.to_text(), eg.to_text());
}
