use conjugacy_core::mobius::{
    canonicalize, eigen_axes_check, prefer, CanonicalCase, KillingField, LorentzPair,
};
use conjugacy_core::sampling::rng;
use nalgebra::DMatrix;
use rand::Rng;

fn random_invertible(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let sv = a.clone().svd(false, false).singular_values;
        if sv.max() / sv.min() < 1e3 {
            return a;
        }
    }
}

fn conjugate(case: CanonicalCase, a: &DMatrix<f64>) -> LorentzPair {
    let n = case.dim();
    let inv = a.clone().try_inverse().unwrap();
    let h = inv.transpose() * prefer(n) * &inv;
    let m = inv.transpose() * case.matrix() * &inv;
    let h = (&h + h.transpose()) * 0.5;
    let m = (&m - m.transpose()) * 0.5;
    LorentzPair::new(h, m).unwrap()
}

fn random_case(r: &mut impl Rng) -> CanonicalCase {
    let mut p = || r.random_range(0.2..3.0);
    let (a, b) = (p(), p());
    match r.random_range(0..8) {
        0 => CanonicalCase::RealPair { lambda: a },
        1 => CanonicalCase::ImaginaryPair { lambda: a },
        2 => CanonicalCase::Nilpotent,
        3 => CanonicalCase::FirstType { lambda: a, mu: b },
        4 => CanonicalCase::FirstType { lambda: a, mu: 0.0 },
        5 => CanonicalCase::FirstType { lambda: 0.0, mu: b },
        6 => CanonicalCase::SecondType { lambda: a.max(b), mu: a.min(b) },
        _ => CanonicalCase::ThirdType { mu: if r.random_bool(0.5) { b } else { 0.0 } },
    }
}

#[test]
fn round_trip_of_conjugated_canonical_pairs() {
    let mut r = rng(2024);
    let mut worst_h: f64 = 0.0;
    let mut worst_n: f64 = 0.0;
    for _ in 0..500 {
        let case = random_case(&mut r);
        let a = random_invertible(&mut r, case.dim());
        let pair = conjugate(case, &a);
        let form = canonicalize(&pair).unwrap_or_else(|e| panic!("{case}: {e}"));
        assert_eq!(form.case.name(), case.name(), "{case} -> {}", form.case);
        for (x, y) in form.case.params().iter().zip(case.params()) {
            assert!((x - y).abs() < 1e-6, "{case} -> {}", form.case);
        }
        worst_h = worst_h.max(form.h_residual);
        worst_n = worst_n.max(form.n_residual);
        assert!(eigen_axes_check(&pair.h, &pair.n).unwrap(), "{case}");
        let l = pair.generator();
        let ln = l.norm();
        assert!(l.trace().abs() < 1e-9 * ln.max(1.0));
        assert!((&l * &l * &l).trace().abs() < 1e-9 * ln.powi(3).max(1.0));
    }
    assert!(worst_h < 1e-10, "{worst_h}");
    assert!(worst_n < 1e-8, "{worst_n}");
}

#[test]
fn corrupted_pairs_are_detected() {
    let mut r = rng(77);
    let mut flagged = 0;
    for _ in 0..100 {
        let case = CanonicalCase::FirstType { lambda: 1.0, mu: 1.3 };
        let a = random_invertible(&mut r, 5);
        let pair = conjugate(case, &a);
        let bump = DMatrix::from_fn(5, 5, |_, _| r.random_range(-0.3..0.3));
        let n = &pair.n + (&bump + bump.transpose());
        if !eigen_axes_check(&pair.h, &n).unwrap() {
            flagged += 1;
        }
    }
    assert!(flagged > 0);
}

#[test]
fn flow_matches_field_for_random_generators() {
    let mut r = rng(5);
    for _ in 0..50 {
        let mut p = [0.0; 10];
        p.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        let f = KillingField::from_params(&p);
        let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let v = f.eval(&x);
        let w = conjugacy_core::mobius::flow_velocity(&f.generator(), &x, 1e-4);
        for i in 0..3 {
            assert!((v[i] - w[i]).abs() < 1e-6);
        }
    }
}
