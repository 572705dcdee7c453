//! Integrability of conjugate directions.
//!
//! For X < 0 there are two direction fields ±ω and ±η; either is closed
//! exactly when both cubic contractions p and q vanish on it. For X = 0 and
//! Y > 0 the single direction is closed exactly when V and a fifth invariant
//! combination vanish.

use std::fmt;

use thiserror::Error;

use crate::directions::{
    constraint_residuals, eta_from_omega, solve_directions, DirectionClass, DirectionError,
    DirectionSolution, CONSTRAINT_TOL, TOL_CLASS,
};
use crate::invariants::{
    core_invariants, e_invariant, invariant_set, natural_scale, rel_residual, upsilon_for,
    InvariantSet, EPS_DEN,
};
use crate::jet::Jet3;
use crate::tensor::{bilinear, det3, dot, mat_vec, tri, tri_vec, Mat3, Vec3};

/// Tolerance on scale-normalised residuals for a positive verdict.
pub const VERDICT_TOL: f64 = 1e-7;

/// Overall sign relating the invariant expansion of Q to Y√Y q⁺q⁻ with the
/// positive root of Y. Fixed once against a witness jet (see tests).
pub const Q_SIGN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrabilityError {
    #[error("wrong branch: point has class {0}")]
    WrongBranch(DirectionClass),
    #[error(transparent)]
    Direction(#[from] DirectionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Generic,
    UniqueDirection,
    Infinite,
    NoConjugate,
    Critical,
}

impl Branch {
    pub fn of(class: DirectionClass) -> Branch {
        match class {
            DirectionClass::FourDistinct => Branch::Generic,
            DirectionClass::TwoDistinct => Branch::UniqueDirection,
            DirectionClass::InfinitelyMany => Branch::Infinite,
            DirectionClass::NoneReal => Branch::NoConjugate,
            DirectionClass::CriticalPoint => Branch::Critical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Generic => "Generic",
            Branch::UniqueDirection => "UniqueDirection",
            Branch::Infinite => "Infinite",
            Branch::NoConjugate => "NoConjugate",
            Branch::Critical => "Critical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict {
    Admits,
    AdmitsOnBranch(Vec3),
    Rejects,
    Inconclusive,
}

impl Verdict {
    pub fn admits(&self) -> bool {
        matches!(self, Verdict::Admits | Verdict::AdmitsOnBranch(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Admits => "Admits",
            Verdict::AdmitsOnBranch(_) => "AdmitsOnBranch",
            Verdict::Rejects => "Rejects",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrabilityReport {
    pub branch: Branch,
    pub p_plus: f64,
    pub p_minus: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub p_direct: f64,
    pub p_invariant: f64,
    pub q_direct: f64,
    pub q_invariant: f64,
    /// V over its natural scale.
    pub v_residual: f64,
    /// The fifth invariant combination over its natural scale.
    pub fifth_residual: f64,
    /// The two raw determinant conditions over their natural scale.
    pub bis4_residual: f64,
    pub bis5_residual: f64,
    /// The σ-form of the second X = 0 condition, normalised the same way.
    pub bis5_sigma_residual: f64,
    pub verdict: Verdict,
    pub chosen_omega: Option<Vec3>,
    pub omega: Option<Vec3>,
    pub eta: Option<Vec3>,
}

impl IntegrabilityReport {
    fn empty(branch: Branch) -> Self {
        IntegrabilityReport {
            branch,
            p_plus: f64::NAN,
            p_minus: f64::NAN,
            q_plus: f64::NAN,
            q_minus: f64::NAN,
            p_direct: f64::NAN,
            p_invariant: f64::NAN,
            q_direct: f64::NAN,
            q_invariant: f64::NAN,
            v_residual: f64::NAN,
            fifth_residual: f64::NAN,
            bis4_residual: f64::NAN,
            bis5_residual: f64::NAN,
            bis5_sigma_residual: f64::NAN,
            verdict: Verdict::Inconclusive,
            chosen_omega: None,
            omega: None,
            eta: None,
        }
    }
}

fn p_terms(jet: &Jet3, w: &Vec3) -> [f64; 4] {
    let g = &jet.grad;
    let t = jet.third.to_full();
    let h = jet.hess.to_full();
    let hg = mat_vec(&h, g);
    let hw = mat_vec(&h, w);
    [
        tri(&t, g, g, g),
        tri(&t, g, w, w),
        2.0 * dot(&hg, &hg),
        -2.0 * dot(&hw, &hw),
    ]
}

fn q_terms(jet: &Jet3, w: &Vec3) -> [f64; 3] {
    let g = &jet.grad;
    let t = jet.third.to_full();
    let h = jet.hess.to_full();
    let hg = mat_vec(&h, g);
    let hw = mat_vec(&h, w);
    [tri(&t, g, g, w), tri(&t, w, w, w), 4.0 * dot(&hg, &hw)]
}

/// p(ω) = f_ijk(f^i f^j f^k + f^i ω^j ω^k) + 2 f^i f_ij f^jk f_k − 2 ω^i f_ij f^jk ω_k.
pub fn p_of(jet: &Jet3, w: &Vec3) -> f64 {
    p_terms(jet, w).iter().sum()
}

/// q(ω) = f_ijk(f^i f^j ω^k + ω^i ω^j ω^k) + 4 f^i f_ij f^jk ω_k.
pub fn q_of(jet: &Jet3, w: &Vec3) -> f64 {
    q_terms(jet, w).iter().sum()
}

fn check(jet: &Jet3, w: &Vec3) -> Result<(), DirectionError> {
    let r = constraint_residuals(jet, w);
    if r.iter().all(|v| *v <= CONSTRAINT_TOL) {
        Ok(())
    } else {
        Err(DirectionError::ConstraintViolation(r))
    }
}

fn require_x_negative(jet: &Jet3) -> Result<(), IntegrabilityError> {
    let (_, _, x_rel, y_rel) = crate::directions::scaled_xy(jet);
    let class = crate::directions::classify_xy(x_rel, y_rel);
    if class == DirectionClass::FourDistinct {
        Ok(())
    } else {
        Err(IntegrabilityError::WrongBranch(class))
    }
}

/// (p⁺, p⁻, q⁺, q⁻) for the branches ω and η.
pub fn pq_residuals(
    jet: &Jet3,
    omega: &Vec3,
    eta: &Vec3,
) -> Result<(f64, f64, f64, f64), IntegrabilityError> {
    require_x_negative(jet)?;
    check(jet, omega)?;
    check(jet, eta)?;
    Ok((p_of(jet, omega), p_of(jet, eta), q_of(jet, omega), q_of(jet, eta)))
}

/// Left-hand sides of the two symmetry equations for ω.
pub fn symmetry_residuals_eq45(jet: &Jet3, omega: &Vec3) -> Result<(f64, f64), IntegrabilityError> {
    require_x_negative(jet)?;
    check(jet, omega)?;
    Ok((p_of(jet, omega), q_of(jet, omega)))
}

/// 2(ZS − 2XR + 2XY)² + XV².
pub fn p_invariant(inv: &InvariantSet) -> f64 {
    let t = &inv.tensors;
    let e = t.z * inv.s - 2.0 * t.x * inv.r + 2.0 * t.x * t.y;
    2.0 * e * e + t.x * t.v * t.v
}

/// The fifteen-term expansion of Y√Y q⁺q⁻ in the invariant catalogue.
pub fn q_invariant(inv: &InvariantSet) -> f64 {
    let t = &inv.tensors;
    let (j, z, x) = (t.j, t.z, t.x);
    let inner = x * z * z * z - j * x * x * z + 6.0 * inv.w + 0.25 * j * inv.m
        - (2.0 / 7.0) * z * x * inv.r
        + (5.0 / 7.0) * inv.r * inv.s
        - (15.0 / 7.0) * inv.n
        + (2.0 / 9.0) * z * inv.a
        - 0.9 * inv.f
        - (2.0 / 21.0) * z * inv.k
        + (10.0 / 21.0) * inv.t
        + (6.0 / 25.0) * inv.g
        - (17.0 / 42.0) * j * inv.d;
    Q_SIGN
        * ((1.0 / 6.0) * j * z * inv.b - 0.25 * j * inv.u - 0.25 * z * inv.s * inv.s + x * inner)
}

/// (25/14)N + (3/5)G + (3/4)F + (1/21)T − (17/21)ZK − (7/9)ZA.
pub fn fifth_combination(inv: &InvariantSet) -> f64 {
    let z = inv.tensors.z;
    (25.0 / 14.0) * inv.n + 0.6 * inv.g + 0.75 * inv.f + inv.t / 21.0
        - (17.0 / 21.0) * z * inv.k
        - (7.0 / 9.0) * z * inv.a
}

/// First raw determinant condition: det[∇f, ω, J f_k^{lm} f_l ω_m − 2 f_kl f^l (f^{mn} f_m ω_n)].
pub fn bis4(jet: &Jet3, w: &Vec3) -> f64 {
    let t = jet.third.to_full();
    let h = jet.hess.to_full();
    let g = &jet.grad;
    let j = dot(g, g);
    let hg = mat_vec(&h, g);
    let ghw = bilinear(&h, g, w);
    let tgw = tri_vec(&t, g, w);
    let mut v = [0.0; 3];
    for k in 0..3 {
        v[k] = j * tgw[k] - 2.0 * hg[k] * ghw;
    }
    det3(g, w, &v)
}

/// Second raw determinant condition: det[∇f, ω, J f_k^{lm} ω_l ω_m + f_k^l f_l (f^{mn} f_m f_n + Z)].
pub fn bis5(jet: &Jet3, w: &Vec3) -> f64 {
    let t = jet.third.to_full();
    let h = jet.hess.to_full();
    let g = &jet.grad;
    let core = core_invariants(jet);
    let hg = mat_vec(&h, g);
    let ghg = dot(g, &hg);
    let tww = tri_vec(&t, w, w);
    let mut v = [0.0; 3];
    for k in 0..3 {
        v[k] = core.j * tww[k] + hg[k] * (ghg + core.z);
    }
    det3(g, w, &v)
}

/// The σ-form: det[∇f, ω, −σ + J(J∇Δf − ½Δf∇J)].
pub fn bis5_sigma(jet: &Jet3, inv: &InvariantSet, w: &Vec3) -> f64 {
    let t = &inv.tensors;
    let h = jet.hess.to_full();
    let lap = h[0][0] + h[1][1] + h[2][2];
    let d_lap = crate::tensor::tri_trace(&jet.third.to_full());
    let mut v = [0.0; 3];
    for k in 0..3 {
        v[k] = -t.sigma[k] + t.j * (t.j * d_lap[k] - 0.5 * lap * t.grad_j[k]);
    }
    det3(&jet.grad, w, &v)
}

fn branch_ok(jet: &Jet3, p: f64, q: f64) -> (bool, f64) {
    let sp = natural_scale(jet, -6, 4);
    let sq = natural_scale(jet, -6, 4);
    let r = (p.abs() / sp).max(q.abs() / sq);
    (r < VERDICT_TOL, r)
}

/// Verdict for a point with four distinct conjugate directions.
pub fn generic_verdict(jet: &Jet3) -> Result<IntegrabilityReport, IntegrabilityError> {
    let sol = solve_directions(jet)?;
    generic_from_solution(jet, &sol)
}

fn generic_from_solution(
    jet: &Jet3,
    sol: &DirectionSolution,
) -> Result<IntegrabilityReport, IntegrabilityError> {
    if sol.class != DirectionClass::FourDistinct {
        return Err(IntegrabilityError::WrongBranch(sol.class));
    }
    let omega = sol.omegas[0];
    let eta = eta_from_omega(jet, &omega, 1.0)?;
    let inv = invariant_set(jet);
    let t = &inv.tensors;
    let (pp, pm, qp, qm) = (p_of(jet, &omega), p_of(jet, &eta), q_of(jet, &omega), q_of(jet, &eta));
    let mut rep = IntegrabilityReport::empty(Branch::Generic);
    rep.p_plus = pp;
    rep.p_minus = pm;
    rep.q_plus = qp;
    rep.q_minus = qm;
    rep.p_direct = 8.0 * t.y * t.y * pp * pm;
    rep.p_invariant = p_invariant(&inv);
    rep.q_direct = t.y * t.y.sqrt() * qp * qm;
    rep.q_invariant = q_invariant(&inv);
    rep.v_residual = t.v / natural_scale(jet, -11, 8);
    rep.omega = Some(omega);
    rep.eta = Some(eta);
    let (plus_ok, r_plus) = branch_ok(jet, pp, qp);
    let (minus_ok, r_minus) = branch_ok(jet, pm, qm);
    rep.verdict = if !(r_plus.is_finite() && r_minus.is_finite()) {
        Verdict::Inconclusive
    } else {
        match (plus_ok, minus_ok) {
            (true, true) => Verdict::Admits,
            (true, false) => Verdict::AdmitsOnBranch(omega),
            (false, true) => Verdict::AdmitsOnBranch(eta),
            (false, false) => Verdict::Rejects,
        }
    };
    rep.chosen_omega = match rep.verdict {
        Verdict::AdmitsOnBranch(w) => Some(w),
        Verdict::Admits => Some(omega),
        _ => None,
    };
    Ok(rep)
}

/// Verdict for a point with X = 0 and Y > 0.
pub fn x0_verdict(jet: &Jet3) -> Result<IntegrabilityReport, IntegrabilityError> {
    let sol = solve_directions(jet)?;
    x0_from_solution(jet, &sol)
}

fn x0_from_solution(
    jet: &Jet3,
    sol: &DirectionSolution,
) -> Result<IntegrabilityReport, IntegrabilityError> {
    if sol.class != DirectionClass::TwoDistinct {
        return Err(IntegrabilityError::WrongBranch(sol.class));
    }
    let omega = sol.omegas[0];
    let inv = invariant_set(jet);
    let mut rep = IntegrabilityReport::empty(Branch::UniqueDirection);
    rep.v_residual = inv.tensors.v / natural_scale(jet, -11, 8);
    rep.fifth_residual = fifth_combination(&inv) / natural_scale(jet, -18, 13);
    let bis_scale = natural_scale(jet, -9, 7);
    rep.bis4_residual = bis4(jet, &omega) / bis_scale;
    rep.bis5_residual = bis5(jet, &omega) / bis_scale;
    rep.bis5_sigma_residual = bis5_sigma(jet, &inv, &omega) / natural_scale(jet, -10, 7);
    rep.omega = Some(omega);
    let ok = rep.v_residual.abs() < VERDICT_TOL && rep.fifth_residual.abs() < VERDICT_TOL;
    rep.verdict = if !(rep.v_residual.is_finite() && rep.fifth_residual.is_finite()) {
        Verdict::Inconclusive
    } else if ok {
        Verdict::AdmitsOnBranch(omega)
    } else {
        Verdict::Rejects
    };
    rep.chosen_omega = ok.then_some(omega);
    Ok(rep)
}

/// Classification plus the verdict appropriate to it.
#[derive(Clone, Debug, PartialEq)]
pub struct PointReport {
    pub solution: DirectionSolution,
    pub report: IntegrabilityReport,
}

/// Runs the direction solver and whichever verdict applies.
pub fn analyze(jet: &Jet3) -> Result<PointReport, IntegrabilityError> {
    let solution = match solve_directions(jet) {
        Ok(s) => s,
        Err(DirectionError::CriticalPoint { .. }) => {
            let mut report = IntegrabilityReport::empty(Branch::Critical);
            report.verdict = Verdict::Inconclusive;
            let core = core_invariants(jet);
            return Ok(PointReport {
                solution: DirectionSolution {
                    class: DirectionClass::CriticalPoint,
                    omegas: vec![],
                    x: core.x,
                    y: core.y,
                    x_rel: f64::NAN,
                    y_rel: f64::NAN,
                },
                report,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let report = match solution.class {
        DirectionClass::FourDistinct => generic_from_solution(jet, &solution)?,
        DirectionClass::TwoDistinct => x0_from_solution(jet, &solution)?,
        DirectionClass::InfinitelyMany => {
            // Every smooth choice of axis in the circle of solutions is
            // locally realisable (see the X = Y = 0 classification), so the
            // point admits conjugates.
            let mut r = IntegrabilityReport::empty(Branch::Infinite);
            r.verdict = Verdict::Admits;
            r
        }
        DirectionClass::NoneReal => {
            let mut r = IntegrabilityReport::empty(Branch::NoConjugate);
            r.verdict = Verdict::Rejects;
            r
        }
        DirectionClass::CriticalPoint => IntegrabilityReport::empty(Branch::Critical),
    };
    Ok(PointReport { solution, report })
}

/// Relative residuals of the elimination identities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppendixBResiduals {
    pub a_one: f64,
    pub a_two: f64,
    pub a_three: f64,
    pub p_even: f64,
    pub p_odd: f64,
}

impl AppendixBResiduals {
    pub fn max(&self) -> f64 {
        [self.a_one, self.a_two, self.a_three, self.p_even, self.p_odd]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Checks the identities that eliminate ω and η from quadratic expressions,
/// for a caller-supplied symmetric form `qform`.
pub fn appendix_b_identities(
    jet: &Jet3,
    omega: &Vec3,
    eta: &Vec3,
    qform: &Mat3,
) -> Result<AppendixBResiduals, IntegrabilityError> {
    let (_, _, _, y_rel) = crate::directions::scaled_xy(jet);
    if !(y_rel > TOL_CLASS) {
        return Err(DirectionError::DegenerateY { y_rel }.into());
    }
    check(jet, omega)?;
    check(jet, eta)?;
    let inv = invariant_set(jet);
    let t = &inv.tensors;
    let (j, z, x, y) = (t.j, t.z, t.x, t.y);
    let g = &jet.grad;
    let h = jet.hess.to_full();
    let tr_h = h[0][0] + h[1][1] + h[2][2];
    let tr_q = qform[0][0] + qform[1][1] + qform[2][2];
    let q_h: f64 = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| qform[a][b] * h[a][b]).sum();
    let qgg = bilinear(qform, g, g);
    let gqhg = dot(&mat_vec(qform, g), &mat_vec(&h, g));
    let qww = bilinear(qform, omega, omega);
    let qee = bilinear(qform, eta, eta);
    let qwe = bilinear(qform, omega, eta);

    let a_one = rel_residual(&[
        y * qww,
        y * qee,
        -2.0 * qgg * j * x,
        2.0 * qgg * z * z,
        -2.0 * j * j * tr_q * z * tr_h,
        2.0 * j * j * tr_q * x,
        2.0 * j * j * z * q_h,
        -4.0 * j * z * gqhg,
    ]);
    let a_two = rel_residual(&[
        y.sqrt() * qwe,
        z * qgg,
        -2.0 * j * gqhg,
        -j * j * tr_h * tr_q,
        j * j * q_h,
    ]);
    let e = e_invariant(jet, omega);
    let a_three = rel_residual(&[y * qww, -y * qee, -4.0 * e * upsilon_for(jet, qform)]);

    let (pp, pm) = (p_of(jet, omega), p_of(jet, eta));
    let p_even = rel_residual(&[
        y * pp,
        y * pm,
        -z * inv.s,
        2.0 * x * inv.r,
        -2.0 * x * y,
    ]);
    let p_odd = rel_residual(&[y * pp, -y * pm, -e * t.v / j]);
    Ok(AppendixBResiduals {
        a_one,
        a_two,
        a_three,
        p_even,
        p_odd,
    })
}

/// Relative residual of E² = −½J²X.
pub fn identity_ex(jet: &Jet3, omega: &Vec3) -> f64 {
    let e = e_invariant(jet, omega);
    let c = core_invariants(jet);
    rel_residual(&[e * e, 0.5 * c.j * c.j * c.x])
}

/// Sum of absolute values, used when reporting relative P/Q agreement.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + EPS_DEN)
}
