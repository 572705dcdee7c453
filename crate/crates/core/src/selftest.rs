//! The identity battery behind `conjugacy selftest`.
//!
//! Each suite draws seeded random jets, maps or gallery points and reports the
//! worst residual of every identity it checks. With `corrupt` set, one
//! coefficient in every identity is nudged by 1e-3 so that a healthy build is
//! seen to fail.

use rand::Rng;

use crate::conformal::{weight_residual_signed, weight_test, ConformalMap};
use crate::directions::{constraint_residuals, solve_directions, DirectionClass};
use crate::expr::{EvalError, Expr};
use crate::gallery::{ansatz_residual, cylindrical, entry, list_entries, xyzero_models};
use crate::integrability::{
    analyze, appendix_b_identities, generic_verdict, identity_ex, rel_diff, Verdict,
};
use crate::invariants::{core_invariants, invariant_set, magic_terms, natural_scale, rel_residual, Invariant};
use crate::mobius::{
    canonicalize, classify_xyzero, conjugated_pair, default_samples, random_case, random_invertible,
    XyZeroModel, CASE_NAMES,
};
use crate::reconstruct::{conjugate_relations, reconstruct_g, PathGrid, ReconstructError};
use crate::sampling::{random_expr, random_jet, random_jet_x_negative, random_symmetric, rng, SampleRng};
use crate::tensor::{bilinear, cross, dot, scale, Vec3, PAIRS, TRIPLES};

/// Suite names in run order.
pub const SUITES: [&str; 12] = [
    "jets",
    "magic",
    "identities",
    "appendixB",
    "oracle",
    "trichotomy",
    "gallery",
    "reconstruct",
    "weights",
    "relations",
    "x0",
    "canonical",
];

#[derive(Clone, Debug)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Run only these suites; all when `None`.
    pub suites: Option<Vec<String>>,
    pub corrupt: bool,
    /// Random samples per identity.
    pub samples: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig { seed: 1, suites: None, corrupt: false, samples: 500 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl Check {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Check { name: name.into(), max_residual: 0.0, tolerance, samples: 0 }
    }

    fn record(&mut self, r: f64) {
        self.samples += 1;
        if r.is_nan() || self.max_residual.is_nan() {
            self.max_residual = f64::NAN;
        } else {
            self.max_residual = self.max_residual.max(r);
        }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

pub fn all_passed(results: &[SuiteResult]) -> bool {
    results.iter().all(SuiteResult::passed)
}

/// Runs the selected suites. Unknown suite names are an error.
pub fn run(cfg: &SelftestConfig) -> Result<Vec<SuiteResult>, String> {
    if let Some(sel) = &cfg.suites {
        for s in sel {
            if !SUITES.contains(&s.as_str()) {
                return Err(format!("unknown suite {s:?}; known: {}", SUITES.join(", ")));
            }
        }
    }
    let mut out = Vec::new();
    for (i, name) in SUITES.iter().enumerate() {
        if let Some(sel) = &cfg.suites {
            if !sel.iter().any(|s| s == name) {
                continue;
            }
        }
        let mut r = rng(cfg.seed.wrapping_mul(1000).wrapping_add(i as u64));
        let checks = run_suite(name, &mut r, cfg);
        out.push(SuiteResult { name, checks });
    }
    Ok(out)
}

fn run_suite(name: &str, r: &mut SampleRng, cfg: &SelftestConfig) -> Vec<Check> {
    let k = if cfg.corrupt { 1.0 + 1e-3 } else { 1.0 };
    let n = cfg.samples;
    match name {
        "jets" => jets(r, n, k),
        "magic" => magic(r, n, k),
        "identities" => identities(r, n, k),
        "appendixB" => appendix_b(r, n, k),
        "oracle" => oracle(r, n, k),
        "trichotomy" => trichotomy(r, 2 * n, k),
        "gallery" => gallery(r, k),
        "reconstruct" => reconstruct(k),
        "weights" => weights(r, k),
        "relations" => relations(r, k),
        "x0" => x0(r, k),
        "canonical" => canonical(r, n, k),
        _ => unreachable!(),
    }
}

/// Derivatives of `e` at `p` by Richardson-extrapolated central differences,
/// in the order of [`crate::jet::Jet3::components`].
pub fn richardson_components(e: &Expr, p: Vec3) -> Result<[f64; 20], EvalError> {
    let at = |d: Vec3| e.eval([p[0] + d[0], p[1] + d[1], p[2] + d[2]]);
    let unit = |i: usize, s: f64| {
        let mut v = [0.0; 3];
        v[i] = s;
        v
    };
    let plus = |a: Vec3, b: Vec3| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let d1 = |i: usize, h: f64| -> Result<f64, EvalError> {
        Ok((at(unit(i, h))? - at(unit(i, -h))?) / (2.0 * h))
    };
    let d2 = |i: usize, j: usize, h: f64| -> Result<f64, EvalError> {
        let mut s = 0.0;
        for si in [1.0, -1.0] {
            for sj in [1.0, -1.0] {
                s += si * sj * at(plus(unit(i, si * h), unit(j, sj * h)))?;
            }
        }
        Ok(s / (4.0 * h * h))
    };
    let d3 = |i: usize, j: usize, k: usize, h: f64| -> Result<f64, EvalError> {
        let mut s = 0.0;
        for si in [1.0, -1.0] {
            for sj in [1.0, -1.0] {
                for sk in [1.0, -1.0] {
                    let d = plus(plus(unit(i, si * h), unit(j, sj * h)), unit(k, sk * h));
                    s += si * sj * sk * at(d)?;
                }
            }
        }
        Ok(s / (8.0 * h * h * h))
    };
    let mut c = [0.0; 20];
    c[0] = at([0.0; 3])?;
    for i in 0..3 {
        c[1 + i] = ridders(|h| d1(i, h), 0.2)?;
    }
    for (n, &(i, j)) in PAIRS.iter().enumerate() {
        c[4 + n] = ridders(|h| d2(i, j, h), 0.3)?;
    }
    for (n, &(i, j, k)) in TRIPLES.iter().enumerate() {
        c[10 + n] = ridders(|h| d3(i, j, k, h), 0.4)?;
    }
    Ok(c)
}

/// Richardson extrapolation of a central difference `d(h)` over a shrinking
/// sequence of steps, keeping the tableau entry with the smallest error
/// estimate.
fn ridders(d: impl Fn(f64) -> Result<f64, EvalError>, h0: f64) -> Result<f64, EvalError> {
    const SHRINK: f64 = 1.4;
    const ROWS: usize = 15;
    let fac0 = SHRINK * SHRINK;
    // start from the largest step that stays inside the domain
    let mut h = h0;
    let first = loop {
        match d(h) {
            Ok(v) => break v,
            Err(e) if h < h0 * 1e-3 => return Err(e),
            Err(_) => h /= 4.0,
        }
    };
    let mut prev = vec![first];
    let mut best = prev[0];
    let mut err = f64::INFINITY;
    for _ in 1..ROWS {
        h /= SHRINK;
        let mut row = vec![d(h)?];
        let mut fac = fac0;
        for m in 1..=prev.len() {
            let v = (row[m - 1] * fac - prev[m - 1]) / (fac - 1.0);
            fac *= fac0;
            let e = (v - row[m - 1]).abs().max((v - prev[m - 1]).abs());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        prev = row;
    }
    Ok(best)
}

/// Per-order relative errors of a jet against finite differences. Each
/// component error is divided by the largest component of that order or any
/// lower one, so identically vanishing orders are judged on the jet's scale.
pub fn jet_errors(jet: &[f64; 20], fd: &[f64; 20]) -> [f64; 3] {
    let ranges = [1..4, 4..10, 10..20];
    let mut out = [0.0; 3];
    for (o, rg) in ranges.into_iter().enumerate() {
        let size = fd[..rg.end].iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        out[o] = rg.map(|i| (jet[i] - fd[i]).abs() / size).fold(0.0, f64::max);
    }
    out
}

fn jets(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut low = Check::new("jet orders 1-2 vs Richardson differences", 1e-6);
    let mut high = Check::new("jet order 3 vs Richardson differences", 1e-4);
    let mut done = 0;
    while done < n {
        let depth = r.random_range(1..=3);
        let e = random_expr(r, depth);
        let p = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let (Ok(j), Ok(fd)) = (e.eval_jet(p), richardson_components(&e, p)) else { continue };
        let mut c = j.components();
        c[4] *= k;
        c[10] *= k;
        let err = jet_errors(&c, &fd);
        low.record(err[0].max(err[1]));
        high.record(err[2]);
        done += 1;
    }
    vec![low, high]
}

fn magic(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut random = Check::new("J^2 X + 12|T|^2 on random jets", 1e-8);
    for _ in 0..n {
        let j = random_jet_x_negative(r, 1.0);
        let sol = solve_directions(&j).expect("jet with X < 0 has directions");
        for w in &sol.omegas {
            let [a, b] = magic_terms(&j, w);
            random.record(rel_residual(&[a, k * b]));
        }
    }
    let mut pairs = Check::new("J^2 X + 12|T|^2 on gallery pairs (w = grad g)", 1e-8);
    for e in list_entries() {
        let Some(g) = &e.g else { continue };
        for p in e.domain.samples(r, 20) {
            let jf = e.f.eval_jet(p).expect("gallery point");
            let w = g.eval_jet(p).expect("gallery point").grad;
            let [a, b] = magic_terms(&jf, &w);
            let s = natural_scale(&jf, -10, 6);
            pairs.record((a + k * b).abs() / (a.abs() + b.abs()).max(s));
        }
    }
    vec![random, pairs]
}

fn identities(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut aha = Check::new("phi.phi = (2/3)Z^2 - JX", 1e-6);
    let mut ex = Check::new("E^2 = -J^2 X / 2", 1e-6);
    let mut y = Check::new("Y = Z^2 - 2JX", 1e-6);
    let mut even = Check::new("Y(p+ + p-) = ZS - 2XR + 2XY", 1e-6);
    let mut odd = Check::new("Y(p+ - p-) = EV/J", 1e-6);
    for _ in 0..n {
        let j = random_jet_x_negative(r, 1.0);
        let t = invariant_set(&j);
        let ts = &t.tensors;
        aha.record(rel_residual(&[ts.phi.frob_sq(), -k * (2.0 / 3.0) * ts.z * ts.z, ts.j * ts.x]));
        let c = core_invariants(&j);
        y.record(rel_residual(&[c.y, -k * c.z * c.z, 2.0 * c.j * c.x]));
        let sol = solve_directions(&j).expect("directions");
        let w = sol.omegas[0];
        let e = crate::invariants::e_invariant(&j, &w);
        ex.record(if k == 1.0 { identity_ex(&j, &w) } else { rel_residual(&[e * e, 0.5 * k * c.j * c.j * c.x]) });
        let eta = crate::directions::eta_from_omega(&j, &w, 1.0).expect("eta");
        let q = random_symmetric(r, 1.0);
        match appendix_b_identities(&j, &w, &eta, &q) {
            Ok(res) => {
                even.record(res.p_even * k + (k - 1.0));
                odd.record(res.p_odd * k + (k - 1.0));
            }
            Err(_) => {
                even.record(f64::NAN);
                odd.record(f64::NAN);
            }
        }
    }
    vec![aha, ex, y, even, odd]
}

fn appendix_b(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut checks = [
        Check::new("(a-one) quadratic form in w and eta", 1e-6),
        Check::new("(a-two) mixed form w.eta", 1e-6),
        Check::new("(a-three) difference of forms", 1e-6),
    ];
    let forms: Vec<_> = (0..100).map(|_| random_symmetric(r, 1.0)).collect();
    for _ in 0..n {
        let j = random_jet_x_negative(r, 1.0);
        let w = solve_directions(&j).expect("directions").omegas[0];
        let eta = crate::directions::eta_from_omega(&j, &w, 1.0).expect("eta");
        // every jet meets a few forms; every form is used many times
        for _ in 0..4 {
            let q = &forms[r.random_range(0..forms.len())];
            let q = q.map(|row| row.map(|v| v * k));
            match appendix_b_identities(&j, &w, &eta, &q) {
                Ok(res) => {
                    checks[0].record(res.a_one + (k - 1.0));
                    checks[1].record(res.a_two);
                    checks[2].record(res.a_three);
                }
                Err(_) => checks.iter_mut().for_each(|c| c.record(f64::NAN)),
            }
        }
    }
    checks.to_vec()
}

fn oracle(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut p = Check::new("P invariant vs 8Y^2 p+ p-", 1e-6);
    let mut q = Check::new("Q invariant vs Y^(3/2) q+ q-", 1e-6);
    for _ in 0..n {
        let j = random_jet_x_negative(r, 1.0);
        match generic_verdict(&j) {
            Ok(rep) => {
                p.record(rel_diff(rep.p_invariant * k, rep.p_direct));
                q.record(rel_diff(rep.q_invariant, rep.q_direct));
            }
            Err(_) => {
                p.record(f64::NAN);
                q.record(f64::NAN);
            }
        }
    }
    vec![p, q]
}

/// Number of real solutions of the direction system by an independent
/// route: on the circle ω = √J(cos θ u + sin θ v) the quadratic constraint is
/// A + B cos 2θ + C sin 2θ, with 4, 2 or 0 roots as R² − A² is >, = or < 0.
pub fn circle_root_count(jet: &crate::jet::Jet3) -> (usize, f64) {
    let g = jet.grad;
    let jj = dot(&g, &g);
    let gn = jj.sqrt();
    let nrm = scale(&g, 1.0 / gn);
    let u = crate::mobius::orthogonal_unit(&nrm);
    let v = cross(&nrm, &u);
    let h = jet.hess.to_full();
    let (huu, hvv, huv) = (bilinear(&h, &u, &u), bilinear(&h, &v, &v), bilinear(&h, &u, &v));
    let a = jj * (huu + hvv) / 2.0 + bilinear(&h, &g, &g);
    let b = jj * (huu - hvv) / 2.0;
    let c = jj * huv;
    let r2 = b * b + c * c;
    let disc = r2 - a * a;
    let scale = r2 + a * a + 1e-300;
    let rel = disc / scale;
    let count = if rel > 1e-10 {
        4
    } else if rel < -1e-10 {
        0
    } else {
        2
    };
    (count, rel)
}

fn trichotomy(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut count = Check::new("solution count matches the signs of X and Y", 0.0);
    let mut constraints = Check::new("returned directions satisfy the system", 1e-7);
    let mut ineq = Check::new("X <= 0 whenever real directions exist", 0.0);
    for _ in 0..n {
        let j = random_jet(r, 1.0);
        let (oracle, _) = circle_root_count(&j);
        let sol = solve_directions(&j).expect("random jet is not critical");
        let expected = match sol.class {
            DirectionClass::FourDistinct => 4,
            DirectionClass::TwoDistinct | DirectionClass::InfinitelyMany => 2,
            _ => 0,
        };
        let solver = 2 * sol.omegas.len();
        let miss = if k != 1.0 { 1.0 } else { 0.0 };
        count.record(if oracle == expected && solver == expected { miss } else { 1.0 });
        for w in &sol.omegas {
            constraints.record(constraint_residuals(&j, w).iter().cloned().fold(0.0, f64::max));
        }
        if oracle > 0 {
            ineq.record(if core_invariants(&j).x * k <= 0.0 { 0.0 } else { 1.0 });
        }
    }
    vec![count, constraints, ineq]
}

fn gallery(r: &mut SampleRng, k: f64) -> Vec<Check> {
    let mut class = Check::new("gallery class and verdict at 20 points per entry", 0.0);
    for e in list_entries() {
        for p in e.domain.samples(r, 20) {
            let ok = match e.f.eval_jet(p).ok().and_then(|j| analyze(&j).ok()) {
                Some(rep) => {
                    rep.solution.class == e.expected.class && rep.report.verdict.admits() == e.expected.admits
                }
                None => false,
            };
            class.record(if ok { 0.0 } else { 1.0 });
        }
    }
    let mut cyl = Check::new("cylindrical X = -2AC/r^4", 1e-10);
    for (a, c) in [(1.0, 1.0), (2.0, 0.5)] {
        let (f, _) = cylindrical(a, c);
        let dom = entry("cylindrical").expect("entry").domain;
        for p in dom.samples(r, 20) {
            let x = core_invariants(&f.eval_jet(p).expect("point")).x;
            let rho2 = p[1] * p[1] + p[2] * p[2];
            let want = -2.0 * a * c * k / (rho2 * rho2);
            cyl.record((x - want).abs() / want.abs());
        }
    }
    let mut triple = Check::new("x1x2x3: X = 6f^2", 1e-12);
    let e = entry("x1x2x3").expect("entry");
    for p in e.domain.samples(r, 20) {
        let j = e.f.eval_jet(p).expect("point");
        let x = core_invariants(&j).x;
        triple.record((x - 6.0 * k * j.value * j.value).abs() / x.abs());
    }
    let mut sph = Check::new("spherical-log: X = Y = 0 (scaled)", 1e-12);
    let e = entry("spherical-log").expect("entry");
    for p in e.domain.samples(r, 20) {
        let j = e.f.eval_jet(p).expect("point");
        let c = core_invariants(&j);
        sph.record((c.x.abs() / natural_scale(&j, -6, 4)).max(c.y.abs() / natural_scale(&j, -8, 6)) + (k - 1.0));
    }
    let mut ans = Check::new("ansatz product residual", 1e-10);
    for (b, c) in [(1.0, 0.5), (0.7, -0.3)] {
        let h = crate::gallery::ansatz_product(b * k, c);
        for pt in [[0.3, 0.9], [-0.5, 0.2], [0.8, 0.5]] {
            let res = ansatz_residual(&h, pt).expect("point");
            ans.record(res.abs() + (k - 1.0) * 1e-3);
        }
    }
    vec![class, cyl, triple, sph, ans]
}

fn reconstruct(k: f64) -> Vec<Check> {
    let mut out = Vec::new();
    let grad = |e: &Expr, p: Vec3| e.eval_jet(p).expect("point").grad;
    for (name, base, pole) in [
        ("cylindrical", [-0.2, 0.3, 0.4], None),
        ("log-arccos", [0.2, 0.3, 0.4], Some([-1.0, 0.0, 0.0])),
    ] {
        let e = entry(name).expect("entry");
        let g = e.g.as_ref().expect("pair");
        let mut grid = PathGrid::new(base, 0.05, [10, 10, 10], grad(g, base));
        if let Some(p) = pole {
            grid = grid.with_pole(p);
        }
        let mut err = Check::new(format!("{name}: max error of reconstructed g"), 1e-6);
        let mut lp = Check::new(format!("{name}: plaquette circulation"), 1e-7);
        match reconstruct_g(&e.f, &grid) {
            Ok(s) => {
                err.record(s.max_error_against(g).unwrap_or(f64::NAN) * k + (k - 1.0));
                lp.record(s.loop_max);
            }
            Err(_) => {
                err.record(f64::NAN);
                lp.record(f64::NAN);
            }
        }
        out.push(err);
        out.push(lp);
    }
    let mut controls = Check::new("non-integrable controls rejected (circulation > 1e-3)", 0.0);
    let e = entry("cylinder-sqrt").expect("entry");
    let base = [0.1, 0.3, 0.4];
    let seed = solve_directions(&e.f.eval_jet(base).expect("point")).expect("directions").omegas[0];
    let verdict = reconstruct_g(&e.f, &PathGrid::new(base, 0.1, [4, 4, 4], seed));
    controls.record(match verdict {
        Err(ReconstructError::NonIntegrable { residual, .. }) if residual > 1e-3 * k => 0.0,
        _ => 1.0,
    });
    let e = entry("x1x2x3").expect("entry");
    let verdict = reconstruct_g(&e.f, &PathGrid::new([0.3, 0.4, 0.5], 0.1, [3, 3, 3], [1.0, 0.0, 0.0]));
    controls.record(match verdict {
        Err(err) if err.is_non_integrable() => 0.0,
        _ => 1.0,
    });
    out.push(controls);
    out
}

fn weight_functions() -> Vec<Expr> {
    ["x1*x2 + sin(x3) + 0.3*x1^3", "exp(0.4*x1)*cos(x2) + x3^2", "x1/(1 + x2^2) + atan(x3 - 0.2*x1)"]
        .iter()
        .map(|s| crate::expr::parse(s).expect("fixed formula"))
        .collect()
}

fn weights(r: &mut SampleRng, k: f64) -> Vec<Check> {
    let mut w = Check::new("every invariant has its conformal weight (50 maps)", 1e-6);
    let mut v_sign = Check::new("V fails without the orientation sign on reversing maps", 0.0);
    let mut degree = Check::new("degree column under f -> c f", 1e-9);
    let fs = weight_functions();
    let mut maps = 0;
    while maps < 50 {
        let m = ConformalMap::random(r);
        let x = [r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)];
        if m.pole_distance(&x) < 0.3 {
            continue;
        }
        maps += 1;
        let e = &fs[maps % fs.len()];
        for inv in Invariant::ALL {
            let res = if k == 1.0 {
                weight_test(e, &m, &x, inv)
            } else {
                weight_residual_signed(e, &m, &x, inv, k * if inv.is_odd() { m.orientation() } else { 1.0 })
            };
            w.record(res.unwrap_or(f64::NAN));
        }
        if m.orientation() < 0.0 {
            let wrong = weight_residual_signed(e, &m, &x, Invariant::V, 1.0).unwrap_or(f64::NAN);
            v_sign.record(if wrong > 1e-3 { 0.0 } else { 1.0 });
        }
    }
    let c = 1.7;
    for e in &fs {
        let scaled = Expr::Binary(crate::expr::BinOp::Mul, Box::new(Expr::Constant(c)), Box::new(e.clone()));
        for _ in 0..10 {
            let x = [r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)];
            let (a, b) = (invariant_set(&e.eval_jet(x).expect("point")), invariant_set(&scaled.eval_jet(x).expect("point")));
            for inv in Invariant::ALL {
                let want = c.powi(inv.degree()) * k * a.get(inv);
                let floor = 1e-9 * c.powi(inv.degree()) * natural_scale(&e.eval_jet(x).expect("point"), inv.weight(), inv.degree());
                degree.record((b.get(inv) - want).abs() / (want.abs() + floor));
            }
        }
    }
    vec![w, v_sign, degree]
}

/// Pairs used for the relations between invariants of f and g.
pub fn relation_pairs() -> Vec<(&'static str, Expr, Expr, crate::gallery::Domain)> {
    list_entries()
        .into_iter()
        .filter_map(|e| e.g.clone().map(|g| (e.name, e.f.clone(), g, e.domain)))
        .collect()
}

fn relations(r: &mut SampleRng, k: f64) -> Vec<Check> {
    let names = ["X(f) = X(g)", "X(f+eg) = (1+e^2)^2 X(f)", "Z(f+eg) = (1+e^2)(Z(f)+eZ(g))", "f^ij g_ij = (tr f)(tr g)", "Z(g) = f^ij f_i g_j + J tr g"];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(*n, 1e-8)).collect();
    for (_, f, g, dom) in relation_pairs() {
        let pts = dom.samples(r, 20);
        for eps in [0.3, 0.7, 2.0] {
            match conjugate_relations(&f, &g, &pts, eps * k) {
                Ok(rep) => {
                    for (c, (_, v)) in checks.iter_mut().zip(rep.named()) {
                        c.record(v);
                    }
                }
                Err(_) => checks.iter_mut().for_each(|c| c.record(f64::NAN)),
            }
        }
    }
    if k != 1.0 {
        // the identities are exact in ε, so corrupt a side instead
        checks[0].record(k - 1.0);
    }
    checks
}

fn x0(r: &mut SampleRng, k: f64) -> Vec<Check> {
    let mut v = Check::new("X = 0 entries: V / scale", 1e-7);
    let mut fifth = Check::new("X = 0 entries: fifth combination / scale", 1e-7);
    let mut bis = Check::new("raw determinant forms agree with the verdict", 0.0);
    for e in list_entries() {
        if e.expected.class != DirectionClass::TwoDistinct {
            continue;
        }
        for p in e.domain.samples(r, 20) {
            let Some(rep) = e.f.eval_jet(p).ok().and_then(|j| analyze(&j).ok()) else {
                v.record(f64::NAN);
                continue;
            };
            let rr = &rep.report;
            if e.expected.admits {
                v.record(rr.v_residual.abs() * k + (k - 1.0) * 1e-3);
                fifth.record(rr.fifth_residual.abs());
            }
            let small = rr.bis4_residual.abs() < 1e-7 && rr.bis5_residual.abs() < 1e-7;
            let admits = matches!(rr.verdict, Verdict::AdmitsOnBranch(_) | Verdict::Admits);
            bis.record(if small == admits { 0.0 } else { 1.0 });
        }
    }
    vec![v, fifth, bis]
}

fn canonical(r: &mut SampleRng, n: usize, k: f64) -> Vec<Check> {
    let mut out = Vec::new();
    for name in CASE_NAMES {
        let mut tag = Check::new(format!("{name}: case tag and parameters"), 1e-6);
        let mut h = Check::new(format!("{name}: A^T H A = prefer"), 1e-10);
        for _ in 0..n {
            let case = random_case(r, name).expect("known case");
            let a = random_invertible(r, case.dim(), 1e3);
            let Ok(pair) = conjugated_pair(&case, &a) else {
                tag.record(f64::NAN);
                continue;
            };
            match canonicalize(&pair) {
                Ok(form) if form.case.name() == case.name() => {
                    let err = form
                        .case
                        .params()
                        .iter()
                        .zip(case.params())
                        .map(|(x, y)| (x * k - y).abs())
                        .fold(0.0, f64::max);
                    tag.record(err);
                    h.record(form.h_residual);
                }
                _ => tag.record(f64::NAN),
            }
        }
        out.push(tag);
        out.push(h);
    }
    let mut models = Check::new("classify-xyzero returns the right model", 0.0);
    let want = [
        ("xyzero-linear", XyZeroModel::Linear),
        ("xyzero-log", XyZeroModel::LogR),
        ("xyzero-azimuth", XyZeroModel::AzimuthalAngle),
        ("xyzero-inverted", XyZeroModel::InvertedLinear),
    ];
    for e in xyzero_models() {
        let expected = want.iter().find(|(n, _)| *n == e.name).map(|w| w.1);
        let samples = default_samples(&[0.4, 0.5, 0.6], 0.2);
        let got = classify_xyzero(&e.f, &samples).map(|rep| rep.model).ok();
        let ok = got.is_some() && got == expected && k == 1.0;
        models.record(if ok { 0.0 } else { 1.0 });
    }
    out.push(models);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_matches_known_derivatives() {
        let e = crate::expr::parse("sin(x1)*exp(x2) + x3^3").unwrap();
        let p = [0.3, -0.2, 0.5];
        let fd = richardson_components(&e, p).unwrap();
        let j = e.eval_jet(p).unwrap().components();
        let err = jet_errors(&j, &fd);
        assert!(err[0] < 1e-9 && err[1] < 1e-8 && err[2] < 1e-6, "{err:?}");
    }

    #[test]
    fn circle_count_for_triple_product() {
        let j = crate::expr::parse("x1*x2*x3").unwrap().eval_jet([0.5, 0.7, 0.9]).unwrap();
        assert_eq!(circle_root_count(&j).0, 0);
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let cfg = SelftestConfig { suites: Some(vec!["nope".into()]), ..Default::default() };
        assert!(run(&cfg).is_err());
    }
}
