use conjugacy_core::conformal::{jetchange_route_residual, pullback_jet, ConformalMap, Primitive};
use conjugacy_core::invariants::Invariant;
use conjugacy_core::parse;
use conjugacy_core::sampling::{random_rotation, rng};
use rand::Rng;

fn point(r: &mut impl Rng) -> [f64; 3] {
    [r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)]
}

#[test]
fn composition_matches_sequential_pullbacks() {
    let f = parse("x1*x2 + exp(0.3*x3)*cos(x1)").unwrap();
    let mut r = rng(80);
    let mut done = 0;
    while done < 50 {
        let (m1, m2) = (ConformalMap::random(&mut r), ConformalMap::random(&mut r));
        let x = point(&mut r);
        let both = m1.then(&m2);
        if both.pole_distance(&x) < 0.3 {
            continue;
        }
        done += 1;
        // pull f back through m2, then the result through m1
        let inner = m2.pullback_expr(&f);
        let a = pullback_jet(&m1, &inner, &x).unwrap();
        let b = pullback_jet(&both, &f, &x).unwrap();
        let size = b.components().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (u, v) in a.components().iter().zip(b.components()) {
            assert!((u - v).abs() <= 1e-9 * size, "{u} vs {v}");
        }
    }
}

#[test]
fn jetchange_route_agrees_with_pullback() {
    let f = parse("x1*exp(0.3*x2) + sin(x3)*x1^2 + 0.2*x2*x3^2").unwrap();
    let mut r = rng(81);
    let mut done = 0;
    while done < 50 {
        let m = ConformalMap::random(&mut r);
        let x = point(&mut r);
        if m.pole_distance(&x) < 0.3 {
            continue;
        }
        done += 1;
        for inv in Invariant::ALL {
            let res = jetchange_route_residual(&f, &m, &x, inv).unwrap();
            assert!(res < 1e-7, "{inv:?}: {res}");
        }
    }
}

#[test]
fn upsilon_solves_its_equation() {
    let mut r = rng(82);
    let prims = [
        Primitive::Translate([0.3, -0.2, 0.5]),
        Primitive::Rotate(random_rotation(&mut r)),
        Primitive::Reflect { normal: [0.0, 0.6, 0.8], offset: 0.2 },
        Primitive::Dilate(1.7),
        Primitive::Invert { center: [1.5, -1.0, 0.5] },
    ];
    let h = 1e-4;
    for p in prims {
        let m = ConformalMap::single(p);
        for _ in 0..10 {
            let x = point(&mut r);
            let u = m.upsilon(&x).unwrap();
            let uu: f64 = u.iter().map(|v| v * v).sum();
            let scale = 1.0 + uu;
            for i in 0..3 {
                let (mut a, mut b) = (x, x);
                a[i] += h;
                b[i] -= h;
                let (ua, ub) = (m.upsilon(&a).unwrap(), m.upsilon(&b).unwrap());
                for j in 0..3 {
                    let d = (ua[j] - ub[j]) / (2.0 * h);
                    let want = u[i] * u[j] - if i == j { 0.5 * uu } else { 0.0 };
                    assert!((d - want).abs() < 1e-8 * scale, "{i}{j}: {d} vs {want}");
                }
            }
        }
    }
}
