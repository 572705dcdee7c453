use conjugacy_core::directions::solve_directions;
use conjugacy_core::invariants::{core_invariants, e_invariant, invariant_set, rel_residual, Invariant};
use conjugacy_core::parse;
use conjugacy_core::sampling::{random_jet, random_rotation, random_unit, rng};
use conjugacy_core::tensor::{dot, Vec3};
use rand::Rng;

#[test]
fn aha_on_wide_jets() {
    let mut r = rng(50);
    for _ in 0..1000 {
        let j = random_jet(&mut r, 2.0);
        let t = invariant_set(&j).tensors;
        let res = rel_residual(&[t.phi.frob_sq(), -(2.0 / 3.0) * t.z * t.z, t.j * t.x]);
        assert!(res < 1e-9, "{res}");
    }
}

#[test]
fn e_squared_matches_x() {
    let mut r = rng(51);
    let mut seen = 0;
    while seen < 500 {
        let j = random_jet(&mut r, 1.0);
        let Ok(sol) = solve_directions(&j) else { continue };
        let c = core_invariants(&j);
        for w in &sol.omegas {
            seen += 1;
            let e = e_invariant(&j, w);
            assert!(rel_residual(&[e * e, 0.5 * c.j * c.j * c.x]) < 1e-8);
        }
    }
}

#[test]
fn reflection_flips_only_v() {
    let mut r = rng(52);
    for _ in 0..200 {
        let j = random_jet(&mut r, 1.0);
        let mut q = random_rotation(&mut r);
        q[0] = q[0].map(|v| -v);
        let (a, b) = (invariant_set(&j), invariant_set(&j.rotated(&q)));
        for inv in Invariant::ALL {
            let (x, y) = (a.get(inv), b.get(inv));
            let want = if inv.is_odd() { -x } else { x };
            assert!((y - want).abs() <= 1e-10 * (x.abs() + 1e-12), "{inv:?}: {x} vs {y}");
        }
    }
}

#[test]
fn degree_row() {
    let mut r = rng(53);
    for _ in 0..200 {
        let j = random_jet(&mut r, 1.0);
        let a = invariant_set(&j);
        for c in [2.0, 1.0 / 3.0] {
            let b = invariant_set(&j.scale(c));
            for inv in Invariant::ALL {
                let want = c.powi(inv.degree()) * a.get(inv);
                assert!((b.get(inv) - want).abs() <= 1e-9 * want.abs() + 1e-14, "{inv:?}");
            }
        }
    }
}

#[test]
fn gradients_of_j_z_x_match_differences() {
    let f = parse("x1*exp(0.4*x2) + sin(x3)*x1^2 + 0.3*x2*x3^2 + cos(x1*x3)").unwrap();
    let mut r = rng(54);
    for _ in 0..30 {
        let p: Vec3 = [r.random_range(-0.8..0.8), r.random_range(-0.8..0.8), r.random_range(-0.8..0.8)];
        let d = random_unit(&mut r);
        let at = |s: f64| core_invariants(&f.eval_jet([p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]).unwrap());
        let h = 1e-3;
        let (ap, am, ap2, am2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
        // fourth-order central difference
        let fd = |a: f64, b: f64, c: f64, e: f64| (8.0 * (a - b) - (c - e)) / (12.0 * h);
        let t = invariant_set(&f.eval_jet(p).unwrap()).tensors;
        for (name, g, num) in [
            ("J", t.grad_j, fd(ap.j, am.j, ap2.j, am2.j)),
            ("Z", t.grad_z, fd(ap.z, am.z, ap2.z, am2.z)),
            ("X", t.grad_x, fd(ap.x, am.x, ap2.x, am2.x)),
        ] {
            let exact = dot(&g, &d);
            let size = g.iter().map(|v| v.abs()).sum::<f64>();
            assert!((exact - num).abs() <= 1e-5 * size, "{name}: {exact} vs {num}");
        }
    }
}
