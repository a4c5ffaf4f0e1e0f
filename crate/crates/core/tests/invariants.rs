use phlab::geometry::{
    classify_linearisation, cover_to_torus, projections, IntMatrix, LinearClass, Vec2,
};
use phlab::incoherent::IncoherentAnalysis;
use phlab::lab::{ConfigOverrides, ModelKind};
use phlab::models::{Endomorphism, IncoherentModel, MobiusCircleMap, PerturbedLinearModel};
use phlab::polyline::LeafPolyline;
use phlab::semiconjugacy::SemiconjugacyApprox;
use proptest::prelude::*;

fn cat_map(eps: f64) -> PerturbedLinearModel {
    PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_projection_lands_in_the_unit_square(x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let t = cover_to_torus(Vec2::new(x, y));
        prop_assert!((0.0..1.0).contains(&t.x()));
        prop_assert!((0.0..1.0).contains(&t.y()));
    }

    #[test]
    fn hyperbolic_eigenvalues_multiply_to_the_determinant(
        a in -6i64..7, b in -6i64..7, c in -6i64..7, d in -6i64..7,
    ) {
        let m = IntMatrix::new(a, b, c, d);
        prop_assume!(m.det() != 0);
        let lin = classify_linearisation(m).unwrap();
        if lin.class == LinearClass::Hyperbolic {
            let e = lin.eigen.unwrap();
            prop_assert!(e.lambda_s.abs() < 1.0 && e.lambda_u.abs() > 1.0);
            let prod = e.lambda_s * e.lambda_u;
            prop_assert!((prod.abs() - (m.det() as f64).abs()).abs() <= 1e-9 * prod.abs());
        }
    }

    #[test]
    fn lift_commutes_with_deck_translations(
        x in -3.0f64..3.0, y in -3.0f64..3.0, m in -4i64..5, n in -4i64..5, eps in 0.0f64..0.1,
    ) {
        let f = cat_map(eps);
        let p = Vec2::new(x, y);
        let k = Vec2::new(m as f64, n as f64);
        let lhs = f.lift_apply(p + k);
        let rhs = f.lift_apply(p) + f.linearisation().matrix.apply(k);
        prop_assert!(lhs.distance(rhs) <= 1e-9);
    }

    #[test]
    fn lift_inverse_undoes_the_lift(x in -2.0f64..2.0, y in -2.0f64..2.0, eps in 0.0f64..0.1) {
        let f = cat_map(eps);
        let p = Vec2::new(x, y);
        let q = f.lift_inverse(f.lift_apply(p)).unwrap();
        prop_assert!(q.distance(p) <= 1e-10);
    }

    #[test]
    fn semiconjugacy_residual_is_small(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let f = cat_map(0.05);
        let h = SemiconjugacyApprox::new(&f, 30).unwrap();
        prop_assert!(h.residual(Vec2::new(x, y)).unwrap() <= 1e-6);
    }

    #[test]
    fn unstable_coordinate_of_h_is_deck_equivariant(
        x in 0.0f64..1.0, y in 0.0f64..1.0, m in -3i64..4, n in -3i64..4,
    ) {
        let f = cat_map(0.05);
        let h = SemiconjugacyApprox::new(&f, 30).unwrap();
        let proj = projections(f.linearisation()).unwrap();
        let p = Vec2::new(x, y);
        let k = Vec2::new(m as f64, n as f64);
        let lhs = h.h_u(p + k);
        let rhs = h.h_u(p) + proj.u(k);
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn mobius_map_fixes_the_two_circles(c in -0.9f64..0.9) {
        let psi = MobiusCircleMap::new(c).unwrap();
        prop_assert!(psi.apply(0.0).abs() <= 1e-14);
        prop_assert!((psi.apply(0.5) - 0.5).abs() <= 1e-14);
        prop_assert!((psi.derivative(0.0) * psi.derivative(0.5) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn centre_and_unstable_bundles_are_invariant(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let a = IncoherentAnalysis::new(IncoherentModel::new(0.6).unwrap(), 40, 0.02).unwrap();
        let p = phlab::geometry::TorusPoint::new(x, y);
        prop_assume!(a.is_regular(p));
        prop_assert!(a.splitting_invariance_residual(p).unwrap() <= 1e-6);
    }

    #[test]
    fn arclength_is_monotone_and_additive(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20),
    ) {
        let v: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let l = match LeafPolyline::from_points_dedup(v) {
            Ok(l) => l,
            Err(_) => return Ok(()),
        };
        let s = l.arclength();
        prop_assert!(s.windows(2).all(|w| w[1] > w[0]));
        let direct: f64 = l.segments().map(|(a, b)| a.distance(b)).sum();
        prop_assert!((direct - l.total_length()).abs() <= 1e-12 * (1.0 + direct));
        let r = l.reversed();
        prop_assert!((r.total_length() - l.total_length()).abs() <= 1e-9);
    }

    #[test]
    fn config_values_survive_parsing(eps in 0.0f64..1.0, seed in any::<u64>(), k in 1usize..100) {
        let text = format!("model = perturbed\neps = {eps}\nseed = {seed}\ndepth_K = {k}\n");
        let o = ConfigOverrides::parse(&text).unwrap();
        prop_assert_eq!(o.model, Some(ModelKind::Perturbed));
        prop_assert_eq!(o.eps, Some(eps));
        prop_assert_eq!(o.seed, Some(seed));
        prop_assert_eq!(o.depth_k, Some(k));
    }
}
