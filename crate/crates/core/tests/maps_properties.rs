use hardcore_tree::maps::{
    fixed_points, lambda_cr1, smallest_point_kappa_derivative, tangency_lambda, verify_s_shape, ScalarMap, Stability,
    ROOT_TOL,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn j2_is_s_shaped(b in 2u32..12, t in 1.05f64..20.0) {
        // J₂ is convex at the origin only once λ(b-1) > 1.
        let lambda = t / (b - 1) as f64;
        let r = verify_s_shape(&ScalarMap::J2 { b, lambda }, 50.0, 4000).unwrap();
        prop_assert!(r.is_s_shaped, "{:?}", r.violation);
    }

    #[test]
    fn f_kappa_is_s_shaped_with_j2_inflection(b in 2u32..8, t in 1.05f64..20.0, kappa in 0.0f64..5.0) {
        let lambda = t / (b - 1) as f64;
        let f = verify_s_shape(&ScalarMap::FKappa { b, lambda, kappa }, 50.0, 4000).unwrap();
        let j = verify_s_shape(&ScalarMap::J2 { b, lambda }, 50.0, 4000).unwrap();
        prop_assert!(f.is_s_shaped);
        let (a, c) = (f.inflection.unwrap(), j.inflection.unwrap());
        prop_assert!((a - c).abs() < 1e-6 * (1.0 + c));
    }

    #[test]
    fn h_gamma_is_s_shaped(gamma in 1.01f64..30.0) {
        let r = verify_s_shape(&ScalarMap::HGamma { gamma }, 50.0, 4000).unwrap();
        prop_assert!(r.is_s_shaped, "{:?}", r.violation);
    }

    #[test]
    fn kappa_derivative_matches_finite_difference(b in 2u32..6, s in 0.2f64..3.0, kappa in 0.2f64..3.0) {
        let lambda = s * lambda_cr1(b).unwrap();
        let (_, d) = smallest_point_kappa_derivative(b, lambda, kappa).unwrap();
        let x_at = |k: f64| fixed_points(&ScalarMap::FKappa { b, lambda, kappa: k }, ROOT_TOL).unwrap().smallest();
        let central = |h: f64| (x_at(kappa + h) - x_at(kappa - h)) / (2.0 * h);
        let h = 1e-3 * kappa;
        let fd = (4.0 * central(h / 2.0) - central(h)) / 3.0;
        prop_assert!((fd - d).abs() < 1e-6 * d.abs(), "analytic {} fd {}", d, fd);
    }

    #[test]
    fn scaling_lowers_smallest_point(b in 2u32..6, t in 0.3f64..4.0, theta in 0.05f64..0.95) {
        let lambda = t * lambda_cr1(b).unwrap();
        let j2 = ScalarMap::J2 { b, lambda };
        let scaled = ScalarMap::ScaledJ2 { b, mu: lambda, scale: theta };
        let x = fixed_points(&j2, ROOT_TOL).unwrap().smallest();
        let y = fixed_points(&scaled, ROOT_TOL).unwrap().smallest();
        prop_assert!(y < x);
    }

    #[test]
    fn fixed_points_are_roots(b in 2u32..8, t in 0.2f64..6.0) {
        let map = ScalarMap::J2 { b, lambda: t * lambda_cr1(b).unwrap() };
        let set = fixed_points(&map, ROOT_TOL).unwrap();
        prop_assert!(set.points.len() == 1 || set.points.len() == 3 || set.critical);
        for p in &set.points {
            prop_assert!((map.eval(p.value) - p.value).abs() < 1e-10 * (1.0 + p.value));
        }
    }
}

#[test]
fn tangency_increases_with_kappa() {
    for b in [2, 3, 10] {
        let base = tangency_lambda(b, 0.0).unwrap();
        assert!((base / lambda_cr1(b).unwrap() - 1.0).abs() < 1e-6);
        let mut prev = base;
        for kappa in [0.25, 0.5, 1.0, 2.0] {
            let l = tangency_lambda(b, kappa).unwrap();
            assert!(l > prev, "b={b} κ={kappa}");
            prev = l;
        }
    }
}

#[test]
fn j2_structure_at_known_activities() {
    let three = fixed_points(&ScalarMap::J2 { b: 2, lambda: 7.0 }, ROOT_TOL).unwrap();
    assert_eq!(three.points.len(), 3);
    assert!(three.pairing_residual.unwrap() < 1e-10);
    assert_eq!(three.points[1].stability, Stability::Repelling);
    let j = ScalarMap::J { b: 2, lambda: 7.0 };
    assert!((j.eval(three.smallest()) - three.largest()).abs() < 1e-10);
    let one = fixed_points(&ScalarMap::J2 { b: 2, lambda: 3.0 }, ROOT_TOL).unwrap();
    assert_eq!(one.points.len(), 1);
}

#[test]
fn h_gamma_brackets() {
    for gamma in [3.0f64, 4.0, 10.0] {
        let set = fixed_points(&ScalarMap::HGamma { gamma }, ROOT_TOL).unwrap();
        assert_eq!(set.points.len(), 3, "γ = {gamma}");
        let lg = gamma.ln();
        let (zm, z0, zp) = (set.points[0].value, set.points[1].value, set.points[2].value);
        assert!(0.0 <= zm && zm <= lg - lg.ln());
        assert!(lg - lg.ln() < z0 && z0 <= lg);
        assert!(lg < zp);
    }
    for gamma in [1.5, 2.0, std::f64::consts::E - 1e-3] {
        let set = fixed_points(&ScalarMap::HGamma { gamma }, ROOT_TOL).unwrap();
        assert_eq!(set.points.len(), 1);
        assert!(set.smallest() < 1.0);
    }
}
