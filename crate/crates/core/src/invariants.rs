//! Conformal differential invariants of a function on flat R³.
//!
//! Everything here is a closed-form contraction of a [`Jet3`]; derivatives of
//! the basic invariants J, Z, X and of the tensor φ are expanded by hand so no
//! fourth derivatives are ever needed.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::directions::{constraint_residuals, CONSTRAINT_TOL};
use crate::jet::Jet3;
use crate::tensor::{
    bilinear, det3, dot, frob_sq, levi, mat_mul, mat_vec, norm, tri_mat, tri_trace, tri_vec,
    Mat3, SymMat3, SymTensor3, Vec3, TRIPLES,
};

/// Denominator floor for relative residuals.
pub const EPS_DEN: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("direction violates the conjugacy constraints (residuals {0:?})")]
    ConstraintViolation([f64; 3]),
}

/// |Σ terms| / (Σ |terms| + ε).
pub fn rel_residual(terms: &[f64]) -> f64 {
    let sum: f64 = terms.iter().sum();
    let mag: f64 = terms.iter().map(|t| t.abs()).sum();
    sum.abs() / (mag + EPS_DEN)
}

/// Unpacked derivatives and the products shared by most formulas.
#[derive(Clone, Debug)]
pub(crate) struct Parts {
    pub g: Vec3,
    pub h: Mat3,
    pub t: [[[f64; 3]; 3]; 3],
    pub hg: Vec3,
    pub h2: Mat3,
    pub h2g: Vec3,
    pub tr_h: f64,
    pub tr_t: Vec3,
    pub j: f64,
    pub ghg: f64,
}

impl Parts {
    pub fn new(jet: &Jet3) -> Self {
        let g = jet.grad;
        let h = jet.hess.to_full();
        let t = jet.third.to_full();
        let hg = mat_vec(&h, &g);
        let h2 = mat_mul(&h, &h);
        let h2g = mat_vec(&h, &hg);
        Parts {
            g,
            h,
            t,
            hg,
            h2,
            h2g,
            tr_h: h[0][0] + h[1][1] + h[2][2],
            tr_t: tri_trace(&t),
            j: dot(&g, &g),
            ghg: dot(&g, &hg),
        }
    }
}

/// J, Z, X and Y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoreInvariants {
    pub j: f64,
    pub z: f64,
    pub x: f64,
    pub y: f64,
}

pub fn core_invariants(jet: &Jet3) -> CoreInvariants {
    core_from_parts(&Parts::new(jet))
}

fn core_from_parts(p: &Parts) -> CoreInvariants {
    let j = p.j;
    let z = p.ghg + j * p.tr_h;
    let x = 2.0 * dot(&p.hg, &p.hg) - j * frob_sq(&p.h) + j * p.tr_h * p.tr_h;
    let y = z * z - 2.0 * j * x;
    CoreInvariants { j, z, x, y }
}

/// The three monomials of X; their absolute sum scales the sign tests.
pub fn x_terms(jet: &Jet3) -> [f64; 3] {
    let p = Parts::new(jet);
    [
        2.0 * dot(&p.hg, &p.hg),
        -p.j * frob_sq(&p.h),
        p.j * p.tr_h * p.tr_h,
    ]
}

/// Tensor intermediates of the invariant catalogue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorSet {
    pub j: f64,
    pub z: f64,
    pub x: f64,
    pub y: f64,
    pub sigma: Vec3,
    pub tau: Vec3,
    pub phi: SymMat3,
    pub rho: SymTensor3,
    pub lambda: Vec3,
    pub upsilon: f64,
    pub v: f64,
    pub grad_j: Vec3,
    pub grad_z: Vec3,
    pub grad_x: Vec3,
}

fn grad_z(p: &Parts) -> Vec3 {
    let tgg = tri_vec(&p.t, &p.g, &p.g);
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = tgg[k] + 2.0 * p.h2g[k] + 2.0 * p.hg[k] * p.tr_h + p.j * p.tr_t[k];
    }
    out
}

fn grad_x(p: &Parts) -> Vec3 {
    let t_hg_g = tri_vec(&p.t, &p.hg, &p.g);
    let h3g = mat_vec(&p.h, &p.h2g);
    let hh = frob_sq(&p.h);
    let mut out = [0.0; 3];
    for l in 0..3 {
        let mut h_t = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                h_t += p.h[j][k] * p.t[j][k][l];
            }
        }
        out[l] = 4.0 * (t_hg_g[l] + h3g[l]) - 2.0 * p.hg[l] * hh - 2.0 * p.j * h_t
            + 2.0 * p.hg[l] * p.tr_h * p.tr_h
            + 2.0 * p.j * p.tr_h * p.tr_t[l];
    }
    out
}

/// Scalar pairing v·ψ·∇φ − w·φ·∇ψ.
pub fn scalar_pairing(psi: f64, dpsi: &Vec3, v: f64, phi: f64, dphi: &Vec3, w: f64) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = v * psi * dphi[i] - w * phi * dpsi[i];
    }
    out
}

fn phi_full(p: &Parts) -> Mat3 {
    let mut phi = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = p.j * p.h[i][j] - (p.g[i] * p.hg[j] + p.hg[i] * p.g[j]);
            if i == j {
                v += -p.j * p.tr_h / 3.0 + 2.0 * p.ghg / 3.0;
            }
            phi[i][j] = v;
        }
    }
    phi
}

/// dphi[l][i][j] = ∇_l φ_ij.
fn phi_derivative(p: &Parts, grad_j: &Vec3) -> [[[f64; 3]; 3]; 3] {
    // ∂_l (Hg)_j = (T·g)_jl + (H²)_jl
    let tg = tri_mat(&p.t, &p.g);
    let mut dhg = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            dhg[j][l] = tg[j][l] + p.h2[j][l];
        }
    }
    let tgg = tri_vec(&p.t, &p.g, &p.g);
    let mut out = [[[0.0; 3]; 3]; 3];
    for l in 0..3 {
        let d_ghg = tgg[l] + 2.0 * p.h2g[l];
        let d_trace = grad_j[l] * p.tr_h + p.j * p.tr_t[l];
        for i in 0..3 {
            for j in 0..3 {
                let mut v = grad_j[l] * p.h[i][j] + p.j * p.t[i][j][l]
                    - (p.h[i][l] * p.hg[j] + p.g[i] * dhg[j][l] + dhg[i][l] * p.g[j]
                        + p.hg[i] * p.h[j][l]);
                if i == j {
                    v += -d_trace / 3.0 + 2.0 * d_ghg / 3.0;
                }
                out[l][i][j] = v;
            }
        }
    }
    out
}

/// Average of a 3-tensor over all index permutations.
fn symmetrize(a: &[[[f64; 3]; 3]; 3]) -> SymTensor3 {
    let mut s = SymTensor3::ZERO;
    for (slot, &(i, j, k)) in TRIPLES.iter().enumerate() {
        s.0[slot] = (a[i][j][k] + a[i][k][j] + a[j][i][k] + a[j][k][i] + a[k][i][j]
            + a[k][j][i])
            / 6.0;
    }
    s
}

/// υ for an arbitrary symmetric form Q: ε^{jkl}(J f_k^i Q_ij − f^i Q_ij f_km f^m) f_l.
pub fn upsilon_for(jet: &Jet3, q: &Mat3) -> f64 {
    let p = Parts::new(jet);
    upsilon_parts(&p, q)
}

fn upsilon_parts(p: &Parts, q: &Mat3) -> f64 {
    let hq = mat_mul(&p.h, q);
    let qg = mat_vec(q, &p.g);
    let mut s = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let e = levi(j, k, l);
                if e != 0.0 {
                    s += e * (p.j * hq[k][j] - qg[j] * p.hg[k]) * p.g[l];
                }
            }
        }
    }
    s
}

/// Q_ij = f_ijk f_k − 2 f_ik f_kj, the form that makes υ invariant.
pub fn q_form(jet: &Jet3) -> Mat3 {
    let p = Parts::new(jet);
    q_form_parts(&p)
}

fn q_form_parts(p: &Parts) -> Mat3 {
    let tg = tri_mat(&p.t, &p.g);
    let mut q = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] = tg[i][j] - 2.0 * p.h2[i][j];
        }
    }
    q
}

pub fn tensor_set(jet: &Jet3) -> TensorSet {
    let p = Parts::new(jet);
    let core = core_from_parts(&p);
    let (j, z, x) = (core.j, core.z, core.x);
    let grad_j = [2.0 * p.hg[0], 2.0 * p.hg[1], 2.0 * p.hg[2]];
    let gz = grad_z(&p);
    let gx = grad_x(&p);
    let pairing = scalar_pairing(j, &grad_j, -2.0, z, &gz, -4.0);
    let sigma = [-0.5 * pairing[0], -0.5 * pairing[1], -0.5 * pairing[2]];
    let mut tau = [0.0; 3];
    for i in 0..3 {
        tau[i] = j * gx[i] - 3.0 * x * grad_j[i];
    }

    let phi = phi_full(&p);
    let dphi = phi_derivative(&p, &grad_j);
    let mut div_phi = [0.0; 3];
    let mut phi_dj = [0.0; 3];
    for k in 0..3 {
        div_phi[k] = (0..3).map(|l| dphi[l][k][l]).sum();
        phi_dj[k] = (0..3).map(|l| phi[k][l] * grad_j[l]).sum();
    }
    let mut lambda = [0.0; 3];
    for jj in 0..3 {
        let div_i: f64 = (0..3).map(|i| dphi[i][i][jj]).sum();
        lambda[jj] = 2.0 * j * div_i - phi_dj[jj];
    }

    let mut a = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                let delta = if i == jj { 1.0 } else { 0.0 };
                a[i][jj][k] = j * dphi[i][jj][k] - 3.0 * phi[i][jj] * grad_j[k]
                    - 0.4 * j * delta * div_phi[k]
                    + 1.2 * delta * phi_dj[k];
            }
        }
    }
    let rho = symmetrize(&a);

    let q = q_form_parts(&p);
    let upsilon = upsilon_parts(&p, &q);
    TensorSet {
        j,
        z,
        x,
        y: core.y,
        sigma,
        tau,
        phi: SymMat3::from_full(&phi),
        rho,
        lambda,
        upsilon,
        v: 4.0 * j * upsilon,
        grad_j,
        grad_z: gz,
        grad_x: gx,
    }
}

/// The full scalar catalogue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantSet {
    pub tensors: TensorSet,
    pub r: f64,
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub t: f64,
    pub u: f64,
    pub f: f64,
    pub g: f64,
    pub k: f64,
    pub m: f64,
    pub n: f64,
    pub w: f64,
}

pub fn scalar_menagerie(ts: &TensorSet, grad: &Vec3) -> InvariantSet {
    let phi = ts.phi.to_full();
    let rho = ts.rho.to_full();
    let (sg, ta, la) = (&ts.sigma, &ts.tau, &ts.lambda);
    let mut f = 0.0;
    let mut n = 0.0;
    let mut w = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                f += rho[i][j][k] * phi[i][j] * la[k];
                n += sg[i] * rho[i][j][k] * phi[j][k];
                for l in 0..3 {
                    w += rho[i][j][k] * rho[i][j][l] * phi[k][l];
                }
            }
        }
    }
    InvariantSet {
        tensors: *ts,
        r: dot(grad, sg),
        s: dot(grad, ta),
        a: dot(sg, sg),
        b: dot(ta, ta),
        d: dot(sg, ta),
        t: bilinear(&phi, sg, sg),
        u: bilinear(&phi, ta, ta),
        f,
        g: bilinear(&phi, la, la),
        k: dot(sg, la),
        m: dot(ta, la),
        n,
        w,
    }
}

/// Every invariant of the catalogue at one point.
pub fn invariant_set(jet: &Jet3) -> InvariantSet {
    scalar_menagerie(&tensor_set(jet), &jet.grad)
}

/// Named scalar invariants with their conformal weight and degree in f.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Invariant {
    J,
    Z,
    X,
    Y,
    R,
    S,
    V,
    A,
    B,
    D,
    T,
    U,
    F,
    G,
    K,
    M,
    N,
    W,
}

impl Invariant {
    pub const ALL: [Invariant; 18] = [
        Invariant::J,
        Invariant::Z,
        Invariant::X,
        Invariant::Y,
        Invariant::R,
        Invariant::S,
        Invariant::V,
        Invariant::A,
        Invariant::B,
        Invariant::D,
        Invariant::T,
        Invariant::U,
        Invariant::F,
        Invariant::G,
        Invariant::K,
        Invariant::M,
        Invariant::N,
        Invariant::W,
    ];

    pub fn weight(self) -> i32 {
        use Invariant::*;
        match self {
            J => -2,
            Z => -4,
            X => -6,
            Y => -8,
            R => -8,
            S => -10,
            V => -11,
            A => -14,
            B => -18,
            D => -16,
            T => -18,
            U => -22,
            F => -18,
            G => -18,
            K => -14,
            M => -16,
            N => -18,
            W => -18,
        }
    }

    pub fn degree(self) -> i32 {
        use Invariant::*;
        match self {
            J => 2,
            Z => 3,
            X => 4,
            Y => 6,
            R => 6,
            S => 7,
            V => 8,
            A => 10,
            B => 12,
            D => 11,
            T => 13,
            U => 15,
            F => 13,
            G => 13,
            K => 10,
            M => 11,
            N => 13,
            W => 13,
        }
    }

    /// Changes sign under orientation reversal.
    pub fn is_odd(self) -> bool {
        self == Invariant::V
    }

    pub fn name(self) -> &'static str {
        use Invariant::*;
        match self {
            J => "J",
            Z => "Z",
            X => "X",
            Y => "Y",
            R => "R",
            S => "S",
            V => "V",
            A => "A",
            B => "B",
            D => "D",
            T => "T",
            U => "U",
            F => "F",
            G => "G",
            K => "K",
            M => "M",
            N => "N",
            W => "W",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Invariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Invariant::ALL
            .iter()
            .copied()
            .find(|i| i.name() == s)
            .ok_or_else(|| format!("unknown invariant `{s}`"))
    }
}

impl InvariantSet {
    pub fn get(&self, inv: Invariant) -> f64 {
        use Invariant::*;
        let t = &self.tensors;
        match inv {
            J => t.j,
            Z => t.z,
            X => t.x,
            Y => t.y,
            R => self.r,
            S => self.s,
            V => t.v,
            A => self.a,
            B => self.b,
            D => self.d,
            T => self.t,
            U => self.u,
            F => self.f,
            G => self.g,
            K => self.k,
            M => self.m,
            N => self.n,
            W => self.w,
        }
    }
}

/// Typical size of an invariant of weight `w` and degree `d` at this jet:
/// ‖∇f‖^d κ^(−w−d) with κ the inverse length scale set by the second and
/// third derivatives.
pub fn natural_scale(jet: &Jet3, weight: i32, degree: i32) -> f64 {
    let gn = norm(&jet.grad);
    if gn == 0.0 {
        return EPS_DEN;
    }
    let hn = jet.hess.frob_sq().sqrt();
    let tn = jet.third.norm_sq().sqrt();
    let kappa = (hn / gn).max((tn / gn).sqrt());
    let e = -weight - degree;
    let ks = if e == 0 { 1.0 } else { kappa.powi(e) };
    gn.powi(degree) * ks + EPS_DEN
}

/// E = ε^{ijk} f_i ω_j f_kl ω^l.
pub fn e_invariant(jet: &Jet3, omega: &Vec3) -> f64 {
    let h = jet.hess.to_full();
    det3(&jet.grad, omega, &mat_vec(&h, omega))
}

/// J²X + 12 T_ijk T^ijk with T_ijk = f_[i ω_j f_k]l ω^l.
pub fn magic_residual(jet: &Jet3, omega: &Vec3) -> Result<f64, InvariantError> {
    let res = constraint_residuals(jet, omega);
    if res.iter().any(|r| *r > CONSTRAINT_TOL) {
        return Err(InvariantError::ConstraintViolation(res));
    }
    Ok(magic_terms(jet, omega).iter().sum())
}

/// The two sides J²X and 12‖T‖² of the magic identity.
pub fn magic_terms(jet: &Jet3, omega: &Vec3) -> [f64; 2] {
    let h = jet.hess.to_full();
    let a = jet.grad;
    let b = *omega;
    let c = mat_vec(&h, omega);
    let mut tt = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let v = (a[i] * b[j] * c[k] + a[j] * b[k] * c[i] + a[k] * b[i] * c[j]
                    - a[j] * b[i] * c[k]
                    - a[i] * b[k] * c[j]
                    - a[k] * b[j] * c[i])
                    / 6.0;
                tt += v * v;
            }
        }
    }
    let core = core_invariants(jet);
    [core.j * core.j * core.x, 12.0 * tt]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    fn jet(src: &str, p: Vec3) -> Jet3 {
        parse(src).unwrap().eval_jet(p).unwrap()
    }

    #[test]
    fn triple_product_x() {
        let c = core_invariants(&jet("x1*x2*x3", [1.0, 1.0, 1.0]));
        assert_relative_eq!(c.x, 6.0, max_relative = 1e-14);
        assert_eq!(c.y, c.z * c.z - 2.0 * c.j * c.x);
    }

    #[test]
    fn linear_function_is_trivial() {
        let j = jet("x1", [0.3, 0.2, 0.1]);
        let c = core_invariants(&j);
        assert_eq!((c.j, c.z, c.x, c.y), (1.0, 0.0, 0.0, 0.0));
        let inv = invariant_set(&j);
        for i in Invariant::ALL {
            if i != Invariant::J {
                assert_eq!(inv.get(i), 0.0, "{i}");
            }
        }
        assert_eq!(inv.tensors.phi, SymMat3::ZERO);
        assert_eq!(inv.tensors.rho, SymTensor3::ZERO);
    }

    #[test]
    fn log_radius_core() {
        let c = core_invariants(&jet("log(sqrt(x1^2+x2^2+x3^2))", [1.0, 0.0, 0.0]));
        assert_relative_eq!(c.j, 1.0, max_relative = 1e-15);
        assert!(c.z.abs() < 1e-15 && c.x.abs() < 1e-15 && c.y.abs() < 1e-15);
    }

    #[test]
    fn phi_is_trace_free() {
        let ts = tensor_set(&jet("exp(x1)*sin(x2)+x3^3*x1", [0.3, 0.7, -0.4]));
        let n = ts.phi.frob_sq().sqrt();
        assert!(ts.phi.trace().abs() <= 1e-12 * n);
        let rho = ts.rho.to_full();
        for k in 0..3 {
            let tr: f64 = (0..3).map(|i| rho[i][i][k]).sum();
            assert!(tr.abs() < 1e-10 * ts.rho.norm_sq().sqrt());
        }
    }

    #[test]
    fn magic_trivial_cases() {
        assert_eq!(magic_residual(&jet("x1", [0.0; 3]), &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let q = jet("x1^2-x2^2-x3^2", [1.0, 1.0, 0.0]);
        assert_eq!(magic_residual(&q, &[2.0, 2.0, 0.0]).unwrap(), 0.0);
        assert!(magic_residual(&q, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn invariant_names_round_trip() {
        for i in Invariant::ALL {
            assert_eq!(i.name().parse::<Invariant>().unwrap(), i);
        }
        assert!("Q".parse::<Invariant>().is_err());
    }
}
