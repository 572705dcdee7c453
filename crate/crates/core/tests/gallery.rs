use conjugacy_core::directions::{solve_directions, DirectionClass};
use conjugacy_core::gallery::{ansatz_product, ansatz_residual, cylindrical, entry, list_entries};
use conjugacy_core::integrability::analyze;
use conjugacy_core::invariants::{core_invariants, natural_scale};
use conjugacy_core::sampling::rng;

#[test]
fn verdicts_match_expectations() {
    let mut r = rng(20);
    for e in list_entries() {
        for p in e.domain.samples(&mut r, 20) {
            let rep = analyze(&e.f.eval_jet(p).unwrap()).unwrap();
            assert_eq!(rep.solution.class, e.expected.class, "{} at {p:?}", e.name);
            assert_eq!(rep.report.verdict.admits(), e.expected.admits, "{} at {p:?}", e.name);
        }
    }
}

#[test]
fn cylindrical_x_closed_form() {
    let mut r = rng(21);
    for (a, c) in [(1.0, 1.0), (2.0, 0.5), (0.3, 3.0)] {
        let (f, _) = cylindrical(a, c);
        let dom = entry("cylindrical").unwrap().domain;
        for p in dom.samples(&mut r, 20) {
            let x = core_invariants(&f.eval_jet(p).unwrap()).x;
            let rho2 = p[1] * p[1] + p[2] * p[2];
            let want = -2.0 * a * c / (rho2 * rho2);
            assert!((x - want).abs() < 1e-10 * want.abs(), "{x} vs {want}");
        }
    }
}

#[test]
fn triple_product_x_is_six_f_squared() {
    let e = entry("x1x2x3").unwrap();
    for p in e.domain.samples(&mut rng(22), 20) {
        let j = e.f.eval_jet(p).unwrap();
        let x = core_invariants(&j).x;
        assert!((x - 6.0 * j.value * j.value).abs() < 1e-12 * x);
    }
}

#[test]
fn spherical_log_has_vanishing_x_and_y() {
    let e = entry("spherical-log").unwrap();
    for p in e.domain.samples(&mut rng(23), 20) {
        let j = e.f.eval_jet(p).unwrap();
        let c = core_invariants(&j);
        assert!(c.x.abs() < 1e-12 * natural_scale(&j, -6, 4));
        assert!(c.y.abs() < 1e-12 * natural_scale(&j, -8, 6));
    }
}

#[test]
fn ansatz_products_solve_the_equation_and_have_x_zero() {
    for (b, c) in [(1.0, 0.5), (0.7, -0.3), (2.0, 0.9)] {
        let h = ansatz_product(b, c);
        for pt in [[0.3, 0.9], [-0.5, 0.2], [1.1, 0.01]] {
            let res = ansatz_residual(&h, pt).unwrap();
            assert!(res.abs() < 1e-10, "{res}");
        }
    }
    for name in ["ansatz-product", "ansatz-product-2", "intro-pair-1"] {
        let e = entry(name).unwrap();
        for p in e.domain.samples(&mut rng(24), 20) {
            let j = e.f.eval_jet(p).unwrap();
            assert!(core_invariants(&j).x.abs() < 1e-10 * natural_scale(&j, -6, 4));
        }
    }
}

#[test]
fn eikonal_direction_is_along_the_axis() {
    let e = entry("eikonal-radius").unwrap();
    for p in e.domain.samples(&mut rng(25), 20) {
        let j = e.f.eval_jet(p).unwrap();
        let sol = solve_directions(&j).unwrap();
        assert_eq!(sol.class, DirectionClass::TwoDistinct);
        assert_eq!(sol.omegas.len(), 1);
        let w = sol.omegas[0];
        let len = j.grad[1].hypot(j.grad[2]);
        assert!((w[0].abs() - len).abs() < 1e-12 && w[1].abs() < 1e-12 && w[2].abs() < 1e-12);
    }
}

#[test]
fn square_radius_has_no_real_direction() {
    let e = entry("cylinder-square").unwrap();
    for p in e.domain.samples(&mut rng(26), 20) {
        let x = core_invariants(&e.f.eval_jet(p).unwrap()).x;
        assert!(x > 0.0);
    }
}
