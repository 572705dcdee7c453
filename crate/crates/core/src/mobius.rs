//! Canonical forms of a skew matrix against a Lorentzian form, conformal
//! Killing fields on R³, and the classification of functions with X = Y = 0.
//!
//! Conformal Killing fields
//! `V = −s − m x + λ x + x (r·x) − ½ r |x|²` correspond to elements of o(4,1)
//! through the null cone point `X(x) = (1, x, −½|x|²)` of the form
//!
//! ```text
//!       [0 0 1]
//!   H = [0 I 0]
//!       [1 0 0]
//! ```
//!
//! acting by `K = H⁻¹N` with
//!
//! ```text
//!       [ −λ  −rᵀ   0 ]
//!   K = [ −s  −m    r ]
//!       [  0   sᵀ   λ ]
//! ```
//!
//! so that the projected flow of K on the cone is exactly V.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::directions::scaled_xy;
use crate::tensor::{cross, dot, norm, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobiusError {
    #[error("unsupported dimension {0}; expected 3 or 5")]
    BadDimension(usize),
    #[error("form is not Lorentzian (eigenvalues {0:?})")]
    NotLorentzian(Vec<f64>),
    #[error("second matrix is not skew (relative asymmetry {0:e})")]
    NotSkew(f64),
    #[error("canonical case is numerically ambiguous: {0}")]
    IllConditioned(String),
    #[error("Killing field fit is rank deficient (singular value ratio {0:e})")]
    RankDeficient(f64),
    #[error("need at least 10 usable sample points, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Relative size of an eigenvalue square below which it counts as zero, and
/// above which it counts as clearly nonzero. In between the case is ambiguous.
pub const SQUARE_TOLS: (f64, f64) = (1e-11, 1e-10);
/// The same for the product of the two squares when their sum vanishes.
pub const PRODUCT_TOLS: (f64, f64) = (1e-18, 1e-16);
/// Semisimple and defective bounds for ‖L(L² + μ²)‖ when zero is a triple
/// eigenvalue.
pub const DEFECT_TOLS: (f64, f64) = (1e-12, 1e-11);
/// Eigenvalues of H⁻¹N smaller than this fraction of ‖H⁻¹N‖ are treated as
/// zero by [`eigen_axes_check`]; defective zero eigenvalues are only resolved
/// to about the cube root of machine precision.
pub const AXES_ZERO_TOL: f64 = 1e-4;

/// The preferred form of the Lorentzian matrix, block `[[0,0,1],[0,I,0],[1,0,0]]`.
pub fn prefer(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    p[(0, n - 1)] = 1.0;
    p[(n - 1, 0)] = 1.0;
    for i in 1..n - 1 {
        p[(i, i)] = 1.0;
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct LorentzPair {
    pub h: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

fn check_lorentzian(h: &DMatrix<f64>) -> Result<(), MobiusError> {
    let d = h.nrows();
    if d != 3 && d != 5 {
        return Err(MobiusError::BadDimension(d));
    }
    if h.ncols() != d {
        return Err(MobiusError::BadDimension(h.ncols()));
    }
    let hn = h.norm();
    if (h - h.transpose()).norm() > 1e-12 * hn {
        return Err(MobiusError::NotLorentzian(vec![]));
    }
    let ev = SymmetricEigen::new(h.clone()).eigenvalues;
    let neg = ev.iter().filter(|v| **v < 0.0).count();
    let small = ev.iter().any(|v| v.abs() <= 1e-12 * hn);
    if neg != 1 || small || !(hn > 0.0) {
        return Err(MobiusError::NotLorentzian(ev.iter().copied().collect()));
    }
    Ok(())
}

impl LorentzPair {
    pub fn new(h: DMatrix<f64>, n: DMatrix<f64>) -> Result<Self, MobiusError> {
        check_lorentzian(&h)?;
        if n.shape() != h.shape() {
            return Err(MobiusError::BadDimension(n.nrows()));
        }
        let nn = n.norm();
        let asym = (&n + n.transpose()).norm();
        if asym > 1e-12 * nn {
            return Err(MobiusError::NotSkew(asym / nn));
        }
        Ok(LorentzPair { h, n })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// H⁻¹N.
    pub fn generator(&self) -> DMatrix<f64> {
        let inv = self.h.clone().try_inverse().expect("Lorentzian form is invertible");
        inv * &self.n
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CanonicalCase {
    RealPair { lambda: f64 },
    ImaginaryPair { lambda: f64 },
    Nilpotent,
    FirstType { lambda: f64, mu: f64 },
    SecondType { lambda: f64, mu: f64 },
    ThirdType { mu: f64 },
}

impl CanonicalCase {
    pub fn dim(&self) -> usize {
        match self {
            CanonicalCase::RealPair { .. } | CanonicalCase::ImaginaryPair { .. } | CanonicalCase::Nilpotent => 3,
            _ => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CanonicalCase::RealPair { .. } => "RealPair",
            CanonicalCase::ImaginaryPair { .. } => "ImaginaryPair",
            CanonicalCase::Nilpotent => "Nilpotent",
            CanonicalCase::FirstType { .. } => "FirstType",
            CanonicalCase::SecondType { .. } => "SecondType",
            CanonicalCase::ThirdType { .. } => "ThirdType",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            CanonicalCase::RealPair { lambda } | CanonicalCase::ImaginaryPair { lambda } => vec![lambda],
            CanonicalCase::Nilpotent => vec![],
            CanonicalCase::FirstType { lambda, mu } | CanonicalCase::SecondType { lambda, mu } => {
                vec![lambda, mu]
            }
            CanonicalCase::ThirdType { mu } => vec![mu],
        }
    }

    /// The canonical skew matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut c = DMatrix::zeros(n, n);
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut set = |i: usize, j: usize, v: f64| {
            c[(i, j)] = v;
            c[(j, i)] = -v;
        };
        match *self {
            CanonicalCase::RealPair { lambda } => set(0, 2, lambda),
            CanonicalCase::ImaginaryPair { lambda } => {
                set(0, 1, lambda * r2);
                set(2, 1, lambda * r2);
            }
            CanonicalCase::Nilpotent => set(1, 2, 2.0),
            CanonicalCase::FirstType { lambda, mu } => {
                set(0, 4, lambda);
                set(2, 3, mu);
            }
            CanonicalCase::SecondType { lambda, mu } => {
                set(0, 1, lambda * r2);
                set(4, 1, lambda * r2);
                set(2, 3, mu);
            }
            CanonicalCase::ThirdType { mu } => {
                set(1, 4, 2.0);
                set(2, 3, mu);
            }
        }
        c
    }
}

impl fmt::Display for CanonicalCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        let p = self.params();
        if !p.is_empty() {
            let s: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            write!(f, "({})", s.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    /// Columns are the new basis vectors.
    pub a: DMatrix<f64>,
    pub case: CanonicalCase,
    /// Largest entry of |AᵀHA − prefer|.
    pub h_residual: f64,
    /// Largest entry of |AᵀNA − canonical|.
    pub n_residual: f64,
}

type Vector = DVector<f64>;

fn hdot(h: &DMatrix<f64>, u: &Vector, v: &Vector) -> f64 {
    u.dot(&(h * v))
}

/// Right singular vectors for the `k` smallest singular values.
fn nullspace(m: &DMatrix<f64>, k: usize) -> Vec<Vector> {
    let n = m.ncols();
    let mut sq = m.clone();
    if m.nrows() < n {
        sq = DMatrix::zeros(n, n);
        sq.rows_mut(0, m.nrows()).copy_from(m);
    }
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    idx.iter()
        .take(k)
        .map(|&i| vt.row(i).transpose())
        .collect()
}

/// Basis of the H-orthogonal complement of `vs`.
fn h_complement(h: &DMatrix<f64>, vs: &[Vector]) -> Vec<Vector> {
    let n = h.nrows();
    let mut m = DMatrix::zeros(vs.len(), n);
    for (i, v) in vs.iter().enumerate() {
        m.row_mut(i).copy_from(&(h * v).transpose());
    }
    nullspace(&m, n - vs.len())
}

/// Basis of span(`basis`) in which H takes the preferred form. The span must
/// be Lorentzian.
fn prefer_basis(h: &DMatrix<f64>, basis: &[Vector]) -> Result<Vec<Vector>, MobiusError> {
    let k = basis.len();
    let b = DMatrix::from_columns(basis);
    let g = b.transpose() * h * &b;
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let mut w = Vec::with_capacity(k);
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for i in 0..k {
        let d = eig.eigenvalues[i];
        let v = &b * eig.eigenvectors.column(i) / d.abs().sqrt();
        if d < 0.0 {
            neg.push(w.len());
        } else {
            pos.push(w.len());
        }
        w.push(v);
    }
    if neg.len() != 1 || pos.is_empty() {
        return Err(MobiusError::NotLorentzian(eig.eigenvalues.iter().copied().collect()));
    }
    let (t, p) = (&w[neg[0]], &w[pos[0]]);
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = vec![(p + t) * r2];
    for &i in &pos[1..] {
        out.push(w[i].clone());
    }
    out.push((p - t) * r2);
    Ok(out)
}

/// H-orthonormal basis of a spacelike span.
fn orthonormal(h: &DMatrix<f64>, basis: &[Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(basis.len());
    for v in basis {
        let mut u = v.clone();
        for _ in 0..2 {
            for e in &out {
                u -= e * hdot(h, e, &u);
            }
        }
        let n2 = hdot(h, &u, &u);
        out.push(u / n2.abs().sqrt());
    }
    out
}

/// Normal form of the generator on an invariant spacelike subspace of
/// dimension 2, 3 or 4: an optional axis and rotation planes (p, q, rate)
/// with L p = −rate·q, L q = rate·p, ordered by decreasing rate.
fn spacelike_planes(
    h: &DMatrix<f64>,
    l: &DMatrix<f64>,
    basis: &[Vector],
) -> (Option<Vector>, Vec<(Vector, Vector, f64)>) {
    let e = orthonormal(h, basis);
    let k = e.len();
    let lift = |c: &DVector<f64>| -> Vector {
        let mut v = Vector::zeros(h.nrows());
        for i in 0..k {
            v += &e[i] * c[i];
        }
        v
    };
    // M_ij = coefficient of e_i in L e_j.
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = hdot(h, &e[i], &(l * &e[j]));
        }
    }
    let m = (&m - m.transpose()) * 0.5;
    if k == 2 {
        let w = m[(1, 0)];
        let (p, q) = if w <= 0.0 {
            (e[0].clone(), e[1].clone())
        } else {
            (e[0].clone(), -&e[1])
        };
        return (None, vec![(p, q, w.abs())]);
    }
    let msq = -(&m * &m);
    let eig = SymmetricEigen::new((&msq + msq.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let coords: Vec<DVector<f64>> = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    if k == 3 {
        let axis = lift(&coords[2]);
        let rest = [lift(&coords[0]), lift(&coords[1])];
        let (_, planes) = spacelike_planes(h, l, &rest);
        return (Some(axis), planes);
    }
    // k == 4: take the fastest plane, then the complement.
    let p = coords[0].clone();
    let mp = &m * &p;
    let rate = mp.norm();
    let q = if rate > 0.0 { -&mp / rate } else { coords[1].clone() };
    let mut rest = Vec::new();
    for c in coords.iter().skip(1) {
        let mut v = c.clone();
        for _ in 0..2 {
            v -= &p * p.dot(&v);
            v -= &q * q.dot(&v);
        }
        if v.norm() > 0.5 {
            rest.push(lift(&(v.clone() / v.norm())));
        }
        if rest.len() == 2 {
            break;
        }
    }
    let (_, mut planes) = spacelike_planes(h, l, &rest);
    planes.insert(0, (lift(&p), lift(&q), rate));
    (None, planes)
}

fn h_scale_null_pair(h: &DMatrix<f64>, first: Vector, last: Vector) -> (Vector, Vector) {
    let c = hdot(h, &first, &last);
    (first / c, last)
}

/// Nilpotent chain a0 ← a1 ← a4 inside the invariant subspace `w0` with
/// L a1 = −2 a0, L a4 = 2 a1.
fn parabolic_chain(h: &DMatrix<f64>, l: &DMatrix<f64>, w0: &[Vector]) -> [Vector; 3] {
    let l2 = l * l;
    let b = DMatrix::from_columns(w0);
    let img = &l2 * &b;
    let svd = img.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut best = 0;
    for i in 1..svd.singular_values.len() {
        if svd.singular_values[i] > svd.singular_values[best] {
            best = i;
        }
    }
    let v = &b * vt.row(best).transpose();
    let w = l * &v;
    let u = l * &w;
    let c = hdot(h, &w, &w);
    let sc = c.sqrt();
    let a1 = &w / sc;
    let a0 = -&u / (2.0 * sc);
    let mut a4 = &v * (2.0 / sc);
    let gamma = -hdot(h, &a4, &a4) / 2.0;
    a4 += &a0 * gamma;
    [a0, a1, a4]
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Size {
    Zero,
    Pos,
    Neg,
}

fn size_of(u: f64, scale: f64, tols: (f64, f64), what: &str) -> Result<Size, MobiusError> {
    let r = u / scale;
    if r.abs() < tols.0 {
        Ok(Size::Zero)
    } else if r.abs() < tols.1 {
        Err(MobiusError::IllConditioned(format!("{what}: relative size {r:e}")))
    } else if r > 0.0 {
        Ok(Size::Pos)
    } else {
        Ok(Size::Neg)
    }
}

fn identity_basis(n: usize) -> Vec<Vector> {
    (0..n).map(|i| Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect()
}

/// Finds A with AᵀHA in the preferred form and AᵀNA canonical.
pub fn canonicalize(p: &LorentzPair) -> Result<CanonicalForm, MobiusError> {
    let first = canonicalize_once(p)?;
    // A second pass on the transformed, well-conditioned pair polishes the
    // basis when H was badly scaled.
    let h2 = first.a.transpose() * &p.h * &first.a;
    let n2 = first.a.transpose() * &p.n * &first.a;
    let polished = LorentzPair {
        h: (&h2 + h2.transpose()) * 0.5,
        n: (&n2 - n2.transpose()) * 0.5,
    };
    match canonicalize_once(&polished) {
        Ok(second) if second.case.name() == first.case.name() => {
            let out = finish(p, &first.a * second.a, second.case)?;
            if out.h_residual.max(out.n_residual) <= first.h_residual.max(first.n_residual) {
                return Ok(out);
            }
            Ok(first)
        }
        _ => Ok(first),
    }
}

fn canonicalize_once(p: &LorentzPair) -> Result<CanonicalForm, MobiusError> {
    let n = p.dim();
    let h = &p.h;
    let l = p.generator();
    let ln = l.norm();
    let zero = p.n.norm() <= 1e-14 * h.norm() || ln == 0.0;
    let eye = DMatrix::<f64>::identity(n, n);
    let l2 = &l * &l;
    // Rounding in forming H⁻¹N is amplified by the conditioning of H, so
    // sizes are judged against ‖H⁻¹‖‖N‖ rather than ‖H⁻¹N‖.
    let hinv = h.clone().try_inverse().expect("Lorentzian form is invertible");
    let ref_norm = hinv.norm() * p.n.norm();
    let scale = ref_norm * ref_norm;

    let (cols, case): (Vec<Vector>, CanonicalCase) = if zero {
        let c = prefer_basis(h, &identity_basis(n))?;
        let case = if n == 3 {
            CanonicalCase::RealPair { lambda: 0.0 }
        } else {
            CanonicalCase::FirstType { lambda: 0.0, mu: 0.0 }
        };
        (c, case)
    } else if n == 3 {
        let s = 0.5 * l2.trace();
        match size_of(s, scale, SQUARE_TOLS, "squared eigenvalue")? {
            Size::Pos => {
                let lam = s.sqrt();
                let (a0, a2) = hyperbolic_pair(h, &l, lam, &eye);
                let mid = h_complement(h, &[a0.clone(), a2.clone()]);
                let mid = orthonormal(h, &mid).remove(0);
                (vec![a0, mid, a2], CanonicalCase::RealPair { lambda: lam })
            }
            Size::Neg => {
                let k = timelike_kernel(h, &l);
                let plane = h_complement(h, std::slice::from_ref(&k));
                let (_, planes) = spacelike_planes(h, &l, &plane);
                let (a1, q, lam) = planes[0].clone();
                let [a0, a2] = elliptic_ends(&k, &q);
                (vec![a0, a1, a2], CanonicalCase::ImaginaryPair { lambda: lam })
            }
            Size::Zero => {
                let [a0, a1, a2] = parabolic_chain(h, &l, &identity_basis(3));
                (vec![a0, a1, a2], CanonicalCase::Nilpotent)
            }
        }
    } else {
        // Squares u of the eigenvalues solve u² − s1·u + s2 = 0. Deciding from
        // the sum and product avoids the square root of a tiny discriminant
        // for nilpotent generators.
        let s1 = 0.5 * l2.trace();
        let tr4 = (&l2 * &l2).trace();
        let s2 = 0.5 * (s1 * s1 - 0.5 * tr4);
        // With s1 clearly nonzero the larger root is stable and the smaller
        // one, s2/q, is judged on its own scale. With s1 ≈ 0 the roots are
        // ±√(−s2) and only the product can tell zero from nonzero.
        let sum = if (s1 / scale).abs() < SQUARE_TOLS.0 {
            Size::Zero
        } else if s1 > 0.0 {
            Size::Pos
        } else {
            Size::Neg
        };
        let (hi, lo, u_hi, u_lo) = if sum == Size::Zero {
            match size_of(s2, scale * scale, PRODUCT_TOLS, "eigenvalue product")? {
                Size::Zero => (Size::Zero, Size::Zero, 0.0, 0.0),
                Size::Neg => (Size::Pos, Size::Neg, (-s2).sqrt(), -(-s2).sqrt()),
                Size::Pos => {
                    return Err(MobiusError::IllConditioned(
                        "eigenvalue squares are complex".into(),
                    ))
                }
            }
        } else {
            let disc = (s1 * s1 - 4.0 * s2).max(0.0).sqrt();
            let q = 0.5 * (s1 + disc.copysign(s1));
            let small = s2 / q;
            let big = if sum == Size::Pos { Size::Pos } else { Size::Neg };
            match (big, size_of(small, scale, SQUARE_TOLS, "smaller squared eigenvalue")?) {
                (Size::Pos, Size::Zero) => (Size::Pos, Size::Zero, q, 0.0),
                (Size::Neg, Size::Zero) => (Size::Zero, Size::Neg, 0.0, q),
                (Size::Pos, Size::Neg) => (Size::Pos, Size::Neg, q, small),
                (Size::Neg, Size::Pos) => (Size::Pos, Size::Neg, small, q),
                (Size::Neg, Size::Neg) => (Size::Neg, Size::Neg, q.max(small), q.min(small)),
                (_, tiny) => (Size::Pos, tiny, q, small),
            }
        };
        match (hi, lo) {
            (Size::Pos, Size::Pos) => {
                return Err(MobiusError::IllConditioned(
                    "two real eigenvalue pairs cannot occur for a Lorentzian form".into(),
                ))
            }
            (Size::Pos, _) => {
                let lam = u_hi.sqrt();
                let (a0, a4) = hyperbolic_pair(h, &l, lam, &eye);
                let rest = h_complement(h, &[a0.clone(), a4.clone()]);
                let (axis, planes) = spacelike_planes(h, &l, &rest);
                let (a2, a3, mu) = planes[0].clone();
                let axis = axis.expect("three-dimensional block has an axis");
                (vec![a0, axis, a2, a3, a4], CanonicalCase::FirstType { lambda: lam, mu })
            }
            (Size::Zero, Size::Neg) => {
                let mu = (-u_lo).sqrt();
                let plane = nullspace(&(&l2 + &eye * (mu * mu)), 2);
                let (_, planes) = spacelike_planes(h, &l, &plane);
                let (a2, a3, mu) = planes[0].clone();
                let w0 = h_complement(h, &[a2.clone(), a3.clone()]);
                let defect = (&l * (&l2 + &eye * (mu * mu))).norm() / (ref_norm * (scale + mu * mu));
                if defect < DEFECT_TOLS.0 {
                    let u = prefer_basis(h, &w0)?;
                    (
                        vec![u[0].clone(), u[1].clone(), a2, a3, u[2].clone()],
                        CanonicalCase::FirstType { lambda: 0.0, mu },
                    )
                } else if defect > DEFECT_TOLS.1 {
                    let [a0, a1, a4] = parabolic_chain(h, &l, &w0);
                    (vec![a0, a1, a2, a3, a4], CanonicalCase::ThirdType { mu })
                } else {
                    return Err(MobiusError::IllConditioned(format!(
                        "zero eigenvalue neither clearly semisimple nor defective ({defect:e})"
                    )));
                }
            }
            (Size::Neg, Size::Neg) => {
                let k = timelike_kernel(h, &l);
                let rest = h_complement(h, std::slice::from_ref(&k));
                let (_, planes) = spacelike_planes(h, &l, &rest);
                let (a1, q, lam) = planes[0].clone();
                let (a2, a3, mu) = planes[1].clone();
                let [a0, a4] = elliptic_ends(&k, &q);
                (vec![a0, a1, a2, a3, a4], CanonicalCase::SecondType { lambda: lam, mu })
            }
            (Size::Zero, Size::Zero) => {
                let [a0, a1, a4] = parabolic_chain(h, &l, &identity_basis(5));
                let rest = h_complement(h, &[a0.clone(), a1.clone(), a4.clone()]);
                let (_, planes) = spacelike_planes(h, &l, &rest);
                let (a2, a3, mu) = planes[0].clone();
                (vec![a0, a1, a2, a3, a4], CanonicalCase::ThirdType { mu })
            }
            _ => {
                return Err(MobiusError::IllConditioned(
                    "eigenvalue squares out of order".into(),
                ))
            }
        }
    };
    let a = DMatrix::from_columns(&cols);
    finish(p, a, case)
}

fn hyperbolic_pair(h: &DMatrix<f64>, l: &DMatrix<f64>, lam: f64, eye: &DMatrix<f64>) -> (Vector, Vector) {
    let last = nullspace(&(l - eye * lam), 1).remove(0);
    let first = nullspace(&(l + eye * lam), 1).remove(0);
    h_scale_null_pair(h, first, last)
}

fn timelike_kernel(h: &DMatrix<f64>, l: &DMatrix<f64>) -> Vector {
    let k = nullspace(l, 1).remove(0);
    let kk = hdot(h, &k, &k);
    k * (2.0 / kk.abs()).sqrt()
}

/// Ends (a_first, a_last) of the elliptic block from the timelike kernel k
/// (H-norm −2) and q, where L a_mid = −rate·q.
fn elliptic_ends(k: &Vector, q: &Vector) -> [Vector; 2] {
    let b = -q;
    let r2 = std::f64::consts::SQRT_2;
    [(&b * r2 + k) * 0.5, (&b * r2 - k) * 0.5]
}

/// Reads the parameters back from AᵀNA, fixes their signs and measures both
/// residuals.
/// The canonical basis of a nilpotent generator is fixed only up to the null
/// rotations exp(tK) it commutes with, and a large representative amplifies
/// rounding in AᵀHA. Picks the t minimising ‖A exp(tK)‖.
fn shortest_null_rotation(a: &DMatrix<f64>, case: CanonicalCase) -> DMatrix<f64> {
    let nil = match case {
        CanonicalCase::Nilpotent => case,
        CanonicalCase::ThirdType { .. } => CanonicalCase::ThirdType { mu: 0.0 },
        _ => return a.clone(),
    };
    let k = prefer(case.dim()) * nil.matrix();
    let b1 = a * &k;
    let b2 = &b1 * &k * 0.5;
    // ‖a + t b1 + t² b2‖² = c0 + c1 t + c2 t² + c3 t³ + c4 t⁴
    let c = [
        a.dot(a),
        2.0 * a.dot(&b1),
        b1.dot(&b1) + 2.0 * a.dot(&b2),
        2.0 * b1.dot(&b2),
        b2.dot(&b2),
    ];
    if c[4] == 0.0 {
        return a.clone();
    }
    let value = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])));
    // stationary points: roots of the derivative, via its companion matrix
    let (d0, d1, d2) = (c[1] / (4.0 * c[4]), 2.0 * c[2] / (4.0 * c[4]), 3.0 * c[3] / (4.0 * c[4]));
    let companion = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -d0, 1.0, 0.0, -d1, 0.0, 1.0, -d2]);
    let t = companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .fold(0.0, |best, t| if value(t) < value(best) { t } else { best });
    a + b1 * t + b2 * (t * t)
}

fn finish(p: &LorentzPair, a: DMatrix<f64>, case: CanonicalCase) -> Result<CanonicalForm, MobiusError> {
    let n = p.dim();
    let pref = prefer(n);
    let mut a = shortest_null_rotation(&a, case);
    // Newton steps towards AᵀHA = P; each costs O(residual) in the N block.
    for _ in 0..2 {
        let e = a.transpose() * &p.h * &a - &pref;
        let step = DMatrix::<f64>::identity(n, n) - &pref * e * 0.5;
        a = &a * step;
    }
    let r2 = std::f64::consts::SQRT_2;
    let na = |a: &DMatrix<f64>| a.transpose() * &p.n * a;
    let mut c = na(&a);
    let flip = |a: &mut DMatrix<f64>, j: usize| {
        let col = -a.column(j);
        a.set_column(j, &col);
    };
    let case = match case {
        CanonicalCase::RealPair { .. } => {
            if c[(0, 2)] < 0.0 {
                a.swap_columns(0, 2);
                c = na(&a);
            }
            CanonicalCase::RealPair { lambda: c[(0, 2)] }
        }
        CanonicalCase::ImaginaryPair { .. } => {
            if c[(0, 1)] < 0.0 {
                flip(&mut a, 1);
                c = na(&a);
            }
            CanonicalCase::ImaginaryPair { lambda: r2 * c[(0, 1)] }
        }
        CanonicalCase::Nilpotent => CanonicalCase::Nilpotent,
        CanonicalCase::FirstType { .. } => {
            if c[(0, 4)] < 0.0 {
                a.swap_columns(0, 4);
            }
            if na(&a)[(2, 3)] < 0.0 {
                flip(&mut a, 3);
            }
            c = na(&a);
            CanonicalCase::FirstType { lambda: c[(0, 4)], mu: c[(2, 3)] }
        }
        CanonicalCase::SecondType { .. } => {
            if c[(0, 1)] < 0.0 {
                flip(&mut a, 1);
            }
            if na(&a)[(2, 3)] < 0.0 {
                flip(&mut a, 3);
            }
            c = na(&a);
            CanonicalCase::SecondType { lambda: r2 * c[(0, 1)], mu: c[(2, 3)] }
        }
        CanonicalCase::ThirdType { .. } => {
            if c[(2, 3)] < 0.0 {
                flip(&mut a, 3);
                c = na(&a);
            }
            CanonicalCase::ThirdType { mu: c[(2, 3)] }
        }
    };
    let ha = a.transpose() * &p.h * &a;
    let h_residual = (ha - pref).abs().max();
    let n_residual = (c - case.matrix()).abs().max();
    Ok(CanonicalForm {
        a,
        case,
        h_residual,
        n_residual,
    })
}

/// True when every eigenvalue of H⁻¹N lies on the real or imaginary axis.
/// Skewness of N is not required, so the check doubles as a corruption
/// detector.
pub fn eigen_axes_check(h: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<bool, MobiusError> {
    check_lorentzian(h)?;
    if n.shape() != h.shape() {
        return Err(MobiusError::BadDimension(n.nrows()));
    }
    let l = h.clone().try_inverse().expect("Lorentzian form is invertible") * n;
    let ln = l.norm();
    let ev = l.complex_eigenvalues();
    Ok(ev.iter().all(|z| {
        let (re, im) = (z.re.abs(), z.im.abs());
        re + im <= AXES_ZERO_TOL * ln || re * im <= 1e-10 * (re + im) * (re + im)
    }))
}

/// V_j = −s_j − m_jk x^k + λ x_j + x_j (r·x) − ½ r_j |x|².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillingField {
    pub s: Vec3,
    /// Skew.
    pub m: [[f64; 3]; 3],
    pub lam: f64,
    pub r: Vec3,
}

impl KillingField {
    pub fn zero() -> Self {
        KillingField {
            s: [0.0; 3],
            m: [[0.0; 3]; 3],
            lam: 0.0,
            r: [0.0; 3],
        }
    }

    /// From the ten parameters (s, m₁₂, m₁₃, m₂₃, λ, r).
    pub fn from_params(p: &[f64; 10]) -> Self {
        let m = [[0.0, p[3], p[4]], [-p[3], 0.0, p[5]], [-p[4], -p[5], 0.0]];
        KillingField {
            s: [p[0], p[1], p[2]],
            m,
            lam: p[6],
            r: [p[7], p[8], p[9]],
        }
    }

    pub fn params(&self) -> [f64; 10] {
        [
            self.s[0], self.s[1], self.s[2], self.m[0][1], self.m[0][2], self.m[1][2], self.lam,
            self.r[0], self.r[1], self.r[2],
        ]
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let rx = dot(&self.r, x);
        let xx = dot(x, x);
        let mut v = [0.0; 3];
        for j in 0..3 {
            let mx: f64 = (0..3).map(|k| self.m[j][k] * x[k]).sum();
            v[j] = -self.s[j] - mx + self.lam * x[j] + x[j] * rx - 0.5 * self.r[j] * xx;
        }
        v
    }

    /// d[i][j] = ∂_i V_j.
    pub fn gradient(&self, x: &Vec3) -> [[f64; 3]; 3] {
        let rx = dot(&self.r, x);
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                d[i][j] = -self.m[j][i] + (self.lam + rx) * delta + x[j] * self.r[i] - self.r[j] * x[i];
            }
        }
        d
    }

    /// The generator K acting on R⁵.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(5, 5);
        k[(0, 0)] = -self.lam;
        k[(4, 4)] = self.lam;
        for i in 0..3 {
            k[(0, i + 1)] = -self.r[i];
            k[(i + 1, 0)] = -self.s[i];
            k[(i + 1, 4)] = self.r[i];
            k[(4, i + 1)] = self.s[i];
            for j in 0..3 {
                k[(i + 1, j + 1)] = -self.m[i][j];
            }
        }
        k
    }

    pub fn to_pair(&self) -> LorentzPair {
        let h = prefer(5);
        let n = &h * self.generator();
        LorentzPair { h, n }
    }

    /// Residual of the closedness condition for J⁻¹-normalised gradients,
    /// |V|²∇_[iV_j] + 2V^kV_[i∇_j]V_k, relative to |V|²(|∇V| + |V|/(1+|x|)).
    pub fn closedness_residual(&self, x: &Vec3) -> f64 {
        let v = self.eval(x);
        let d = self.gradient(x);
        let vv = dot(&v, &v);
        let dn = d.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let skew = 0.5 * (d[i][j] - d[j][i]);
                let a: f64 = (0..3).map(|k| v[k] * d[j][k]).sum();
                let b: f64 = (0..3).map(|k| v[k] * d[i][k]).sum();
                let t = vv * skew + (v[i] * a - v[j] * b);
                worst = worst.max(t.abs());
            }
        }
        worst / (vv * (dn + vv.sqrt() / (1.0 + norm(x))) + 1e-300)
    }
}

/// Null cone point of x.
pub fn cone_point(x: &Vec3) -> DVector<f64> {
    DVector::from_vec(vec![1.0, x[0], x[1], x[2], -0.5 * dot(x, x)])
}

/// Affine chart of a cone point.
pub fn from_cone(p: &DVector<f64>) -> Vec3 {
    [p[1] / p[0], p[2] / p[0], p[3] / p[0]]
}

/// Velocity of the projected flow of K at x, by central differences of the
/// matrix exponential with step `t`.
pub fn flow_velocity(k: &DMatrix<f64>, x: &Vec3, t: f64) -> Vec3 {
    let p = cone_point(x);
    let fwd = from_cone(&((k * t).exp() * &p));
    let bwd = from_cone(&((k * -t).exp() * &p));
    [
        (fwd[0] - bwd[0]) / (2.0 * t),
        (fwd[1] - bwd[1]) / (2.0 * t),
        (fwd[2] - bwd[2]) / (2.0 * t),
    ]
}

/// Least-squares fit of a conformal Killing field to J⁻¹∇f. Returns the field
/// and the relative RMS misfit.
pub fn fit_killing(e: &Expr, samples: &[Vec3]) -> Result<(KillingField, f64), MobiusError> {
    let mut rows: Vec<([f64; 10], f64)> = Vec::new();
    for x in samples {
        let jet = match e.eval_jet(*x) {
            Ok(j) => j,
            Err(_) => continue,
        };
        let jj = dot(&jet.grad, &jet.grad);
        if !(jj.sqrt() > 1e-8) || !jet.is_finite() {
            continue;
        }
        let target = [jet.grad[0] / jj, jet.grad[1] / jj, jet.grad[2] / jj];
        // Each parameter contributes a known field; the fit is linear.
        for j in 0..3 {
            let mut row = [0.0; 10];
            for (p, slot) in row.iter_mut().enumerate() {
                let mut unit = [0.0; 10];
                unit[p] = 1.0;
                *slot = KillingField::from_params(&unit).eval(x)[j];
            }
            rows.push((row, target[j]));
        }
    }
    let points = rows.len() / 3;
    if points < 10 {
        return Err(MobiusError::TooFewSamples(points));
    }
    let a = DMatrix::from_fn(rows.len(), 10, |i, j| rows[i].0[j]);
    let b = DVector::from_fn(rows.len(), |i, _| rows[i].1);
    // Column scaling keeps the quadratic terms comparable to the constants.
    let scales: Vec<f64> = (0..10).map(|j| a.column(j).norm().max(1e-300)).collect();
    let a_scaled = DMatrix::from_fn(rows.len(), 10, |i, j| a[(i, j)] / scales[j]);
    let svd = a_scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin < 1e-10 * smax {
        return Err(MobiusError::RankDeficient(smin / smax));
    }
    let sol = svd.solve(&b, 0.0).expect("full-rank least squares");
    let mut params = [0.0; 10];
    for j in 0..10 {
        params[j] = sol[j] / scales[j];
    }
    let field = KillingField::from_params(&params);
    let resid = (&a_scaled * &sol - &b).norm();
    Ok((field, resid / (b.norm() + 1e-300)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XyZeroModel {
    Linear,
    LogR,
    AzimuthalAngle,
    InvertedLinear,
    NotClassifiable,
}

impl XyZeroModel {
    pub fn name(self) -> &'static str {
        match self {
            XyZeroModel::Linear => "Linear",
            XyZeroModel::LogR => "LogR",
            XyZeroModel::AzimuthalAngle => "AzimuthalAngle",
            XyZeroModel::InvertedLinear => "InvertedLinear",
            XyZeroModel::NotClassifiable => "NotClassifiable",
        }
    }
}

impl fmt::Display for XyZeroModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XyZeroReport {
    pub model: XyZeroModel,
    pub field: KillingField,
    pub fit_residual: f64,
    pub closedness: f64,
    pub xy_max: f64,
    pub canonical: Option<CanonicalForm>,
    pub reason: Option<String>,
}

/// Tolerance on the Killing fit misfit and on the closedness condition.
pub const KILLING_TOL: f64 = 1e-8;
/// Ratio below which one canonical parameter counts as zero next to the other.
pub const PARAM_RATIO_TOL: f64 = 1e-6;

/// Model for a given Killing field, checked at `samples`.
pub fn classify_killing(field: &KillingField, samples: &[Vec3]) -> XyZeroReport {
    let closedness = samples
        .iter()
        .map(|x| field.closedness_residual(x))
        .fold(0.0, f64::max);
    let mut rep = XyZeroReport {
        model: XyZeroModel::NotClassifiable,
        field: *field,
        fit_residual: 0.0,
        closedness,
        xy_max: 0.0,
        canonical: None,
        reason: None,
    };
    if !(closedness < KILLING_TOL) {
        rep.reason = Some(format!("J-normalised gradient is not closed (residual {closedness:e})"));
        return rep;
    }
    let form = match canonicalize(&field.to_pair()) {
        Ok(f) => f,
        Err(e) => {
            rep.reason = Some(e.to_string());
            return rep;
        }
    };
    rep.model = match form.case {
        CanonicalCase::FirstType { lambda, mu } if lambda > 0.0 && mu <= PARAM_RATIO_TOL * lambda => {
            XyZeroModel::LogR
        }
        CanonicalCase::FirstType { lambda, mu } if mu > 0.0 && lambda <= PARAM_RATIO_TOL * mu => {
            XyZeroModel::AzimuthalAngle
        }
        CanonicalCase::ThirdType { mu } if mu.abs() <= PARAM_RATIO_TOL => {
            // The fixed null direction is the first column; it is the point
            // at infinity exactly when its first cone coordinate vanishes.
            let a0 = form.a.column(0);
            if a0[0].abs() <= 1e-8 * a0.norm() {
                XyZeroModel::Linear
            } else {
                XyZeroModel::InvertedLinear
            }
        }
        _ => XyZeroModel::NotClassifiable,
    };
    if rep.model == XyZeroModel::NotClassifiable {
        rep.reason = Some(format!("canonical case {} has no matching model", form.case));
    }
    rep.canonical = Some(form);
    rep
}

/// Classifies a function with X = Y = 0 on the sample region.
pub fn classify_xyzero(e: &Expr, samples: &[Vec3]) -> Result<XyZeroReport, MobiusError> {
    let mut xy_max: f64 = 0.0;
    for x in samples {
        if let Ok(j) = e.eval_jet(*x) {
            let (_, _, xr, yr) = scaled_xy(&j);
            xy_max = xy_max.max(xr.abs()).max(yr.abs());
        }
    }
    let (field, fit) = fit_killing(e, samples)?;
    let mut rep = classify_killing(&field, samples);
    rep.fit_residual = fit;
    rep.xy_max = xy_max;
    if !(xy_max < crate::directions::TOL_CLASS) {
        rep.model = XyZeroModel::NotClassifiable;
        rep.reason = Some(format!("X and Y do not vanish on the region (max scaled {xy_max:e})"));
    } else if !(fit < KILLING_TOL) {
        rep.model = XyZeroModel::NotClassifiable;
        rep.reason = Some(format!("J⁻¹∇f is not a conformal Killing field (misfit {fit:e})"));
    }
    Ok(rep)
}

/// Deterministic sample cloud in a box, avoiding the x1-axis where the
/// azimuthal model is singular.
pub fn default_samples(center: &Vec3, radius: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    let t = [-1.0, -0.37, 0.41, 1.0];
    for a in t {
        for b in t {
            for c in t {
                let x = [center[0] + radius * a, center[1] + radius * b, center[2] + radius * c];
                out.push(x);
            }
        }
    }
    out
}

/// Random square matrix with condition number below `max_cond`.
pub fn random_invertible(rng: &mut impl Rng, n: usize, max_cond: f64) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sv = a.clone().svd(false, false).singular_values;
        if sv.max() / sv.min() < max_cond {
            return a;
        }
    }
}

/// The pair whose canonical basis is the columns of `a`:
/// H = A⁻ᵀ P A⁻¹ and N = A⁻ᵀ C A⁻¹ with C the canonical matrix of `case`.
pub fn conjugated_pair(case: &CanonicalCase, a: &DMatrix<f64>) -> Result<LorentzPair, MobiusError> {
    let n = case.dim();
    let inv = a.clone().try_inverse().ok_or(MobiusError::RankDeficient(0.0))?;
    let h = inv.transpose() * prefer(n) * &inv;
    let m = inv.transpose() * case.matrix() * &inv;
    LorentzPair::new((&h + h.transpose()) * 0.5, (&m - m.transpose()) * 0.5)
}

/// Random instance of the case with tag `name`, parameters in [0.2, 3).
pub fn random_case(rng: &mut impl Rng, name: &str) -> Option<CanonicalCase> {
    let a = rng.random_range(0.2..3.0);
    let b = rng.random_range(0.2..3.0);
    Some(match name {
        "RealPair" => CanonicalCase::RealPair { lambda: a },
        "ImaginaryPair" => CanonicalCase::ImaginaryPair { lambda: a },
        "Nilpotent" => CanonicalCase::Nilpotent,
        "FirstType" => CanonicalCase::FirstType { lambda: a, mu: b },
        "SecondType" => CanonicalCase::SecondType { lambda: a.max(b), mu: a.min(b) },
        "ThirdType" => CanonicalCase::ThirdType { mu: b },
        _ => return None,
    })
}

/// Case tags in the order of increasing dimension.
pub const CASE_NAMES: [&str; 6] = ["RealPair", "ImaginaryPair", "Nilpotent", "FirstType", "SecondType", "ThirdType"];

/// Unit vector orthogonal to `n`.
pub fn orthogonal_unit(n: &Vec3) -> Vec3 {
    let mut axis = 0;
    for i in 1..3 {
        if n[i].abs() < n[axis].abs() {
            axis = i;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let c = cross(n, &e);
    let l = norm(&c);
    [c[0] / l, c[1] / l, c[2] / l]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn single_eigenvector_pair_is_already_canonical() {
        let h = prefer(3);
        let n = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, -2.0, 0.0]);
        let f = canonicalize(&LorentzPair::new(h, n).unwrap()).unwrap();
        assert_eq!(f.case, CanonicalCase::Nilpotent);
        assert!(f.h_residual < 1e-12 && f.n_residual < 1e-12);
    }

    #[test]
    fn zero_skew_matrix() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
        let f = canonicalize(&LorentzPair::new(h, DMatrix::zeros(3, 3)).unwrap()).unwrap();
        assert_eq!(f.case, CanonicalCase::RealPair { lambda: 0.0 });
        assert!(f.h_residual < 1e-12);
        assert!(eigen_axes_check(&prefer(3), &DMatrix::zeros(3, 3)).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let h = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            LorentzPair::new(h, DMatrix::zeros(3, 3)),
            Err(MobiusError::NotLorentzian(_))
        ));
        let n = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(LorentzPair::new(prefer(3), n), Err(MobiusError::NotSkew(_))));
        assert!(matches!(
            LorentzPair::new(prefer(4), DMatrix::zeros(4, 4)),
            Err(MobiusError::BadDimension(4))
        ));
    }

    #[test]
    fn killing_field_embedding_matches_flow() {
        let f = KillingField::from_params(&[0.3, -0.2, 0.5, 0.7, -0.1, 0.4, 0.9, -0.6, 0.2, 0.3]);
        let k = f.generator();
        let pair = f.to_pair();
        assert!((&pair.n + pair.n.transpose()).norm() < 1e-15);
        for x in [[0.2, -0.4, 0.1], [1.0, 0.5, -0.7]] {
            let v = f.eval(&x);
            let w = flow_velocity(&k, &x, 1e-4);
            for i in 0..3 {
                assert!((v[i] - w[i]).abs() < 1e-6, "{v:?} {w:?}");
            }
        }
    }

    #[test]
    fn fits_of_model_functions() {
        let samples = default_samples(&[0.3, 0.8, 0.6], 0.25);
        let (f, r) = fit_killing(&parse("x1").unwrap(), &samples).unwrap();
        assert!(r < 1e-12);
        assert!((f.s[0] + 1.0).abs() < 1e-10 && f.lam.abs() < 1e-10);
        let (f, r) = fit_killing(&parse("log(sqrt(x1^2+x2^2+x3^2))").unwrap(), &samples).unwrap();
        assert!(r < 1e-12);
        assert!((f.lam - 1.0).abs() < 1e-10);
        let (_, r) = fit_killing(&parse("x1*x2*x3").unwrap(), &samples).unwrap();
        assert!(r > 1e-3);
    }

    #[test]
    fn model_classification() {
        let samples = default_samples(&[0.3, 0.8, 0.6], 0.25);
        for (src, want) in [
            ("x1", XyZeroModel::Linear),
            ("log(sqrt(x1^2+x2^2+x3^2))", XyZeroModel::LogR),
            ("atan2(x3,x2)", XyZeroModel::AzimuthalAngle),
            ("x1/(x1^2+x2^2+x3^2)", XyZeroModel::InvertedLinear),
        ] {
            let rep = classify_xyzero(&parse(src).unwrap(), &samples).unwrap();
            assert_eq!(rep.model, want, "{src}: {:?}", rep.reason);
        }
        let spiral = KillingField {
            lam: 1.0,
            m: [[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, -0.5, 0.0]],
            ..KillingField::zero()
        };
        assert_eq!(classify_killing(&spiral, &samples).model, XyZeroModel::NotClassifiable);
    }
}
