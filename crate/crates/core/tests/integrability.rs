use conjugacy_core::directions::{eta_from_omega, solve_directions, DirectionClass};
use conjugacy_core::gallery::{entry, list_entries};
use conjugacy_core::integrability::{analyze, generic_verdict, p_of, q_of, q_invariant, Verdict, Q_SIGN};
use conjugacy_core::invariants::invariant_set;
use conjugacy_core::reconstruct::loop_residual;
use conjugacy_core::sampling::{random_jet_x_negative, rng};
use conjugacy_core::tensor::{neg, Vec3};

#[test]
fn swapping_branches_swaps_p_and_q() {
    let mut r = rng(70);
    for _ in 0..200 {
        let j = random_jet_x_negative(&mut r, 1.0);
        let rep = generic_verdict(&j).unwrap();
        let (w, eta) = (rep.omega.unwrap(), rep.eta.unwrap());
        assert_eq!(p_of(&j, &w), rep.p_plus);
        assert_eq!(p_of(&j, &eta), rep.p_minus);
        assert_eq!(q_of(&j, &w), rep.q_plus);
        assert_eq!(q_of(&j, &eta), rep.q_minus);
    }
}

#[test]
fn p_is_even_and_q_is_odd() {
    let mut r = rng(71);
    for _ in 0..200 {
        let j = random_jet_x_negative(&mut r, 1.0);
        let w = solve_directions(&j).unwrap().omegas[0];
        assert_eq!(p_of(&j, &neg(&w)), p_of(&j, &w));
        assert_eq!(q_of(&j, &neg(&w)), -q_of(&j, &w));
        // −ω pairs with −η, so p⁺p⁻ and q⁺q⁻ (and the verdict) are sign blind
        let eta = eta_from_omega(&j, &w, 1.0).unwrap();
        let eta_neg = eta_from_omega(&j, &neg(&w), 1.0).unwrap();
        for i in 0..3 {
            assert!((eta_neg[i] + eta[i]).abs() < 1e-12 * (1.0 + eta[i].abs()));
        }
    }
}

#[test]
fn invariant_forms_of_p_and_q_agree_with_the_directions() {
    let mut r = rng(72);
    for _ in 0..500 {
        let j = random_jet_x_negative(&mut r, 1.0);
        let rep = generic_verdict(&j).unwrap();
        let tol = |a: f64, b: f64| 1e-6 * (a.abs() + b.abs() + 1e-300);
        assert!((rep.p_direct - rep.p_invariant).abs() <= tol(rep.p_direct, rep.p_invariant));
        assert!((rep.q_direct - rep.q_invariant).abs() <= tol(rep.q_direct, rep.q_invariant));
    }
}

#[test]
fn frozen_q_sign_on_the_witness_jet() {
    let j = entry("hopf").unwrap().f.eval_jet([0.3, -0.4, 0.7]).unwrap();
    let rep = generic_verdict(&j).unwrap();
    assert!(rep.q_direct.abs() > 1e-6);
    assert_eq!(rep.q_invariant.signum(), rep.q_direct.signum());
    assert_eq!(q_invariant(&invariant_set(&j)).signum(), Q_SIGN * rep.q_direct.signum());
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
fn admitting_points_have_closed_small_loops() {
    let mut r = rng(73);
    for e in list_entries() {
        if !e.expected.admits || e.expected.class == DirectionClass::InfinitelyMany {
            continue;
        }
        for p in e.domain.samples(&mut r, 3) {
            let rep = analyze(&e.f.eval_jet(p).unwrap()).unwrap();
            let seeds: Vec<Vec3> = match rep.report.verdict {
                Verdict::Admits => vec![rep.report.omega.unwrap(), rep.report.eta.unwrap()],
                Verdict::AdmitsOnBranch(w) => vec![w],
                v => panic!("{}: {v:?}", e.name),
            };
            let h = 0.01 * (1.0 + p.iter().map(|v| v.abs()).sum::<f64>());
            for w in seeds {
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    let lr = loop_residual(&e.f, &square(p, h, a, b), &w).unwrap();
                    assert!(lr.relative() < 1e-6, "{} at {p:?}: {}", e.name, lr.relative());
                }
            }
        }
    }
}
