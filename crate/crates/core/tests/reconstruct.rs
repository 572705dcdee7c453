use conjugacy_core::directions::solve_directions;
use conjugacy_core::gallery::{entry, list_entries};
use conjugacy_core::invariants::core_invariants;
use conjugacy_core::parse;
use conjugacy_core::reconstruct::*;
use conjugacy_core::sampling::rng;
use conjugacy_core::tensor::Vec3;

fn grad(e: &conjugacy_core::Expr, p: Vec3) -> Vec3 {
    e.eval_jet(p).unwrap().grad
}

fn square(base: Vec3, h: f64, a: usize, b: usize) -> Vec<Vec3> {
    let mut p1 = base;
    p1[a] += h;
    let mut p2 = p1;
    p2[b] += h;
    let mut p3 = base;
    p3[b] += h;
    vec![base, p1, p2, p3]
}

#[test]
fn cylindrical_conjugate_recovered_on_grid() {
    let e = entry("cylindrical").unwrap();
    let g = e.g.unwrap();
    let base = [-0.2, 0.3, 0.4];
    let grid = PathGrid::new(base, 0.05, [10, 10, 10], grad(&g, base));
    let field = reconstruct_g(&e.f, &grid).unwrap();
    assert_eq!(field.values.len(), 1000);
    assert_eq!(field.values[0], 0.0);
    assert!(field.max_error_against(&g).unwrap() < 1e-6);
    assert!(field.loop_max < 1e-7);
}

#[test]
fn polar_angle_recovered_with_pole() {
    let e = entry("log-arccos").unwrap();
    let g = e.g.unwrap();
    let base = [0.2, 0.3, 0.4];
    let grid = PathGrid::new(base, 0.04, [6, 6, 6], grad(&g, base)).with_pole([-1.0, 0.0, 0.0]);
    let field = reconstruct_g(&e.f, &grid).unwrap();
    assert!(field.max_error_against(&g).unwrap() < 1e-6);
}

#[test]
fn triple_product_has_no_conjugate() {
    let e = parse("x1*x2*x3").unwrap();
    let grid = PathGrid::new([0.3, 0.4, 0.5], 0.1, [3, 3, 3], [1.0, 0.0, 0.0]);
    let err = reconstruct_g(&e, &grid).unwrap_err();
    assert!(err.is_non_integrable(), "{err}");
}

#[test]
fn non_closed_field_detected() {
    let e = entry("cylinder-sqrt").unwrap();
    let base = [0.1, 0.3, 0.4];
    let seed = solve_directions(&e.f.eval_jet(base).unwrap()).unwrap().omegas[0];
    let grid = PathGrid::new(base, 0.1, [4, 4, 4], seed);
    match reconstruct_g(&e.f, &grid) {
        Err(ReconstructError::NonIntegrable { residual, .. }) => assert!(residual > 1e-3),
        other => panic!("expected NonIntegrable, got {other:?}"),
    }
}

#[test]
fn small_loops_close_for_integrable_fields() {
    for name in ["cylindrical", "hopf", "intro-pair-1", "quadratic-pair"] {
        let e = entry(name).unwrap();
        let g = e.g.unwrap();
        let base = [0.15, 0.35, -0.45];
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let r = loop_residual(&e.f, &square(base, 0.05, a, b), &grad(&g, base)).unwrap();
            assert!(r.relative() < 1e-7, "{name}: {}", r.relative());
        }
    }
}

#[test]
fn halving_the_panel_cuts_the_error() {
    let e = entry("cylinder-sqrt").unwrap();
    let base = [0.1, 0.3, 0.4];
    let seed = solve_directions(&e.f.eval_jet(base).unwrap()).unwrap().omegas[0];
    let lp = square(base, 0.2, 1, 2);
    let exact = loop_residual(&e.f, &lp, &seed).unwrap().circulation;
    let err: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&n| (loop_residual_fixed(&e.f, &lp, &seed, n).unwrap().circulation - exact).abs())
        .collect();
    assert!(err[0] / err[1] >= 4.0 && err[1] / err[2] >= 4.0, "{err:?}");
}

#[test]
fn homotopic_paths_agree() {
    let e = entry("hopf").unwrap();
    let g = e.g.unwrap();
    let a = [0.1, 0.4, 0.3];
    let b = [0.3, 0.6, 0.5];
    let seed = grad(&g, a);
    // two routes a -> b: around either side of the box diagonal
    let r1 = vec![a, [b[0], a[1], a[2]], [b[0], b[1], a[2]], b, [a[0], b[1], b[2]], [a[0], a[1], b[2]]];
    let lp = loop_residual(&e.f, &r1, &seed).unwrap();
    assert!(lp.circulation.abs() < 1e-6 * (g.eval(b).unwrap() - g.eval(a).unwrap()).abs());
}

#[test]
fn probes_off_the_grid_are_conjugate() {
    let e = entry("cylindrical").unwrap();
    let g = e.g.unwrap();
    let base = [0.0, 0.3, 0.3];
    let grid = PathGrid::new(base, 0.1, [4, 4, 4], grad(&g, base));
    let field = reconstruct_g(&e.f, &grid).unwrap();
    let mut r = rng(5);
    use rand::Rng;
    for _ in 0..10 {
        let p = [
            base[0] + r.random_range(0.0..0.3),
            base[1] + r.random_range(0.0..0.3),
            base[2] + r.random_range(0.0..0.3),
        ];
        let gg = probe_gradient(&e.f, &field, &p, 1e-3).unwrap();
        let gf = grad(&e.f, p);
        let nf = gf.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ng = gg.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d: f64 = gf.iter().zip(&gg).map(|(a, b)| a * b).sum();
        assert!(((nf - ng) / nf).abs() < 1e-4);
        assert!((d / (nf * ng)).abs() < 1e-4);
    }
}

#[test]
fn continued_field_has_symmetric_derivative() {
    let e = entry("hopf").unwrap();
    let g = e.g.unwrap();
    let p = [0.2, 0.5, -0.3];
    let w0 = grad(&g, p);
    let mut field = DirectionField::new(&e.f, w0);
    let d = 1e-4;
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut a = p;
        let mut b = p;
        a[i] += d;
        b[i] -= d;
        let wa = field.omega(&a, &w0).unwrap();
        let wb = field.omega(&b, &w0).unwrap();
        for j in 0..3 {
            jac[i][j] = (wa[j] - wb[j]) / (2.0 * d);
        }
    }
    let size = jac.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    for (i, row) in jac.iter().enumerate() {
        for (j, v) in row.iter().enumerate().take(i) {
            assert!((v - jac[j][i]).abs() < 1e-5 * size);
        }
    }
}

#[test]
fn ambiguous_seed_is_a_branch_switch() {
    let e = entry("cylinder-sqrt").unwrap();
    let grid = PathGrid::new([0.1, 0.3, 0.4], 0.1, [2, 2, 2], [0.0, 0.0, 1.0]);
    assert!(matches!(reconstruct_g(&e.f, &grid), Err(ReconstructError::BranchSwitch { .. })));
}

#[test]
fn guard_tube_is_respected() {
    let e = entry("cylindrical").unwrap();
    let grid = PathGrid::new([0.0, -0.05, 0.001], 0.1, [2, 2, 2], [1.0, 0.0, 0.3]);
    assert!(matches!(reconstruct_g(&e.f, &grid), Err(ReconstructError::Singular { .. })));
}

#[test]
fn csv_has_one_row_per_node() {
    let e = entry("cylindrical").unwrap();
    let g = e.g.unwrap();
    let base = [0.0, 0.5, 0.5];
    let field = reconstruct_g(&e.f, &PathGrid::new(base, 0.1, [2, 3, 2], grad(&g, base))).unwrap();
    let mut buf = Vec::new();
    field.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.starts_with("x1,x2,x3,g\n"));
}

#[test]
fn gallery_pairs_verify() {
    let mut r = rng(11);
    for e in list_entries() {
        if let Some(g) = &e.g {
            let pts = e.domain.samples(&mut r, 100);
            let rep = verify_pair(&e.f, g, &pts).unwrap();
            assert!(rep.passes(), "{}: {rep:?}", e.name);
        }
    }
    let x = parse("x1").unwrap();
    assert!(!verify_pair(&x, &x, &[[0.1, 0.2, 0.3]]).unwrap().passes());
}

#[test]
fn hopf_relations() {
    let e = entry("hopf").unwrap();
    let pts = e.domain.samples(&mut rng(2), 50);
    let rep = conjugate_relations(&e.f, e.g.as_ref().unwrap(), &pts, 0.7).unwrap();
    assert!(rep.max() < 1e-8, "{rep:?}");
}

#[test]
fn three_harmonic_functions() {
    let mut r = rng(3);
    for name in ["harmonic3-linear", "harmonic3-log", "harmonic3-inverted"] {
        let e = entry(name).unwrap();
        let mut fs = vec![e.f.clone()];
        fs.extend(e.g.clone());
        if name == "harmonic3-log" {
            fs.push(parse("atan2(x3, x2)").unwrap());
        }
        for p in e.domain.samples(&mut r, 20) {
            for f in &fs {
                let j = f.eval_jet(p).unwrap();
                let z = core_invariants(&j).z;
                let scale = conjugacy_core::invariants::natural_scale(&j, -4, 3).max(1e-300);
                assert!(z.abs() < 1e-12 * scale.max(j.grad.iter().map(|v| v.abs()).sum::<f64>().powi(3)));
            }
        }
    }
    // the listed log companion is 3-harmonic but not a conjugate
    let f = parse("log(x1^2+x2^2+x3^2)/2").unwrap();
    let g = parse("atan2(x3, x2)").unwrap();
    let pts = entry("harmonic3-log").unwrap().domain.samples(&mut r, 20);
    assert!(verify_pair(&f, &g, &pts).unwrap().norm_mismatch > 1e-3);
}
