//! Möbius transformations of R³ and the conformal behaviour of invariants.
//!
//! A map m with Dm = λ·(orthogonal) pulls the flat metric back to λ²δ. An
//! invariant I of weight w then satisfies
//! `I(f∘m)(x) = s · λ(x)^(−w) · I(f)(m(x))`, where s is the orientation sign of
//! m for odd invariants and 1 otherwise. Two routes are provided: direct
//! pullback of jets, and the transformation law of jets under a rescaling
//! with Υ = ∇ log λ.

use rand::Rng;
use thiserror::Error;

use crate::expr::{BinOp, EvalError, Expr};
use crate::invariants::{invariant_set, natural_scale, scalar_pairing, tensor_set, Invariant};
use crate::jet::Jet3;
use crate::sampling::{random_rotation, random_unit};
use crate::tensor::{
    dot, identity, mat_det, mat_mul, mat_vec, norm, scale, sub, transpose, Mat3, Vec3, PAIRS,
    TRIPLES,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("map is singular at {0:?}")]
    Pole(Vec3),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Translate(Vec3),
    /// Orthogonal matrix acting as y = Q x.
    Rotate(Mat3),
    /// Reflection in the plane n·x = c, with n a unit vector.
    Reflect { normal: Vec3, offset: f64 },
    Dilate(f64),
    /// Inversion in the unit sphere about `center`.
    Invert { center: Vec3 },
}

const POLE_TOL: f64 = 1e-300;

impl Primitive {
    pub fn orientation(&self) -> f64 {
        match self {
            Primitive::Rotate(q) => mat_det(q).signum(),
            Primitive::Reflect { .. } | Primitive::Invert { .. } => -1.0,
            _ => 1.0,
        }
    }

    pub fn apply(&self, x: &Vec3) -> Result<Vec3, ConformalError> {
        Ok(match self {
            Primitive::Translate(v) => [x[0] + v[0], x[1] + v[1], x[2] + v[2]],
            Primitive::Rotate(q) => mat_vec(q, x),
            Primitive::Reflect { normal, offset } => {
                let d = 2.0 * (dot(normal, x) - offset);
                sub(x, &scale(normal, d))
            }
            Primitive::Dilate(c) => scale(x, *c),
            Primitive::Invert { center } => {
                let d = sub(x, center);
                let r2 = dot(&d, &d);
                if r2 <= POLE_TOL {
                    return Err(ConformalError::Pole(*x));
                }
                [center[0] + d[0] / r2, center[1] + d[1] / r2, center[2] + d[2] / r2]
            }
        })
    }

    pub fn jacobian(&self, x: &Vec3) -> Result<Mat3, ConformalError> {
        Ok(match self {
            Primitive::Translate(_) => identity(),
            Primitive::Rotate(q) => *q,
            Primitive::Reflect { normal, .. } => {
                let mut m = identity();
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] -= 2.0 * normal[i] * normal[j];
                    }
                }
                m
            }
            Primitive::Dilate(c) => {
                let mut m = identity();
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = *c;
                }
                m
            }
            Primitive::Invert { center } => {
                let d = sub(x, center);
                let r2 = dot(&d, &d);
                if r2 <= POLE_TOL {
                    return Err(ConformalError::Pole(*x));
                }
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        m[i][j] = (delta - 2.0 * d[i] * d[j] / r2) / r2;
                    }
                }
                m
            }
        })
    }

    /// Conformal factor λ(x) with Dm = λ·(orthogonal).
    pub fn factor(&self, x: &Vec3) -> Result<f64, ConformalError> {
        Ok(match self {
            Primitive::Dilate(c) => c.abs(),
            Primitive::Invert { center } => {
                let d = sub(x, center);
                let r2 = dot(&d, &d);
                if r2 <= POLE_TOL {
                    return Err(ConformalError::Pole(*x));
                }
                1.0 / r2
            }
            _ => 1.0,
        })
    }

    pub fn apply_jets(&self, x: &[Jet3; 3]) -> Result<[Jet3; 3], ConformalError> {
        Ok(match self {
            Primitive::Translate(v) => [x[0].add_const(v[0]), x[1].add_const(v[1]), x[2].add_const(v[2])],
            Primitive::Rotate(q) => {
                let row = |a: usize| x[0].scale(q[a][0]) + x[1].scale(q[a][1]) + x[2].scale(q[a][2]);
                [row(0), row(1), row(2)]
            }
            Primitive::Reflect { normal, offset } => {
                let d = (x[0].scale(normal[0]) + x[1].scale(normal[1]) + x[2].scale(normal[2]))
                    .add_const(-offset)
                    .scale(2.0);
                [
                    x[0] - d.scale(normal[0]),
                    x[1] - d.scale(normal[1]),
                    x[2] - d.scale(normal[2]),
                ]
            }
            Primitive::Dilate(c) => [x[0].scale(*c), x[1].scale(*c), x[2].scale(*c)],
            Primitive::Invert { center } => {
                let d = [
                    x[0].add_const(-center[0]),
                    x[1].add_const(-center[1]),
                    x[2].add_const(-center[2]),
                ];
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                if r2.value <= POLE_TOL {
                    return Err(ConformalError::Pole([x[0].value, x[1].value, x[2].value]));
                }
                let mut out = [Jet3::default(); 3];
                for i in 0..3 {
                    out[i] = d[i]
                        .div(&r2)
                        .map_err(|_| ConformalError::Pole([x[0].value, x[1].value, x[2].value]))?
                        .add_const(center[i]);
                }
                out
            }
        })
    }

    /// The component functions as formulas in x1, x2, x3.
    pub fn as_exprs(&self) -> [Expr; 3] {
        let var = |i: usize| Expr::Var(i + 1);
        let c = Expr::Constant;
        let bin = |op, a: Expr, b: Expr| Expr::Binary(op, Box::new(a), Box::new(b));
        let lin = |row: [f64; 3], shift: f64| {
            let mut e = c(shift);
            for (i, w) in row.iter().enumerate() {
                e = bin(BinOp::Add, e, bin(BinOp::Mul, c(*w), var(i)));
            }
            e
        };
        match self {
            Primitive::Translate(v) => [0, 1, 2].map(|i| bin(BinOp::Add, var(i), c(v[i]))),
            Primitive::Rotate(q) => [0, 1, 2].map(|a| lin(q[a], 0.0)),
            Primitive::Reflect { normal, offset } => {
                let m = self.jacobian(&[0.0; 3]).unwrap_or(identity());
                [0, 1, 2].map(|a| lin(m[a], 2.0 * offset * normal[a]))
            }
            Primitive::Dilate(k) => [0, 1, 2].map(|i| bin(BinOp::Mul, c(*k), var(i))),
            Primitive::Invert { center } => {
                let d = |i: usize| bin(BinOp::Sub, var(i), c(center[i]));
                let sq = |i: usize| Expr::Pow(Box::new(d(i)), 2.0);
                let r2 = bin(BinOp::Add, bin(BinOp::Add, sq(0), sq(1)), sq(2));
                [0, 1, 2].map(|i| bin(BinOp::Add, c(center[i]), bin(BinOp::Div, d(i), r2.clone())))
            }
        }
    }
}

/// Composition of primitives, applied first to last.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConformalMap {
    pub steps: Vec<Primitive>,
}

impl ConformalMap {
    pub fn new(steps: Vec<Primitive>) -> Self {
        ConformalMap { steps }
    }

    pub fn single(p: Primitive) -> Self {
        ConformalMap { steps: vec![p] }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &ConformalMap) -> ConformalMap {
        let mut steps = self.steps.clone();
        steps.extend(next.steps.iter().cloned());
        ConformalMap { steps }
    }

    pub fn orientation(&self) -> f64 {
        self.steps.iter().map(|p| p.orientation()).product()
    }

    pub fn apply(&self, x: &Vec3) -> Result<Vec3, ConformalError> {
        let mut y = *x;
        for p in &self.steps {
            y = p.apply(&y)?;
        }
        Ok(y)
    }

    pub fn jacobian(&self, x: &Vec3) -> Result<Mat3, ConformalError> {
        let mut y = *x;
        let mut m = identity();
        for p in &self.steps {
            m = mat_mul(&p.jacobian(&y)?, &m);
            y = p.apply(&y)?;
        }
        Ok(m)
    }

    pub fn factor(&self, x: &Vec3) -> Result<f64, ConformalError> {
        let mut y = *x;
        let mut l = 1.0;
        for p in &self.steps {
            l *= p.factor(&y)?;
            y = p.apply(&y)?;
        }
        Ok(l)
    }

    pub fn apply_jets(&self, x: &[Jet3; 3]) -> Result<[Jet3; 3], ConformalError> {
        let mut y = *x;
        for p in &self.steps {
            y = p.apply_jets(&y)?;
        }
        Ok(y)
    }

    /// Jets of the three component functions of the map at `x`.
    pub fn component_jets(&self, x: &Vec3) -> Result<[Jet3; 3], ConformalError> {
        self.apply_jets(&Jet3::coordinates(*x))
    }

    /// Υ = ∇ log λ at `x`, from the second derivatives of the map.
    pub fn upsilon(&self, x: &Vec3) -> Result<Vec3, ConformalError> {
        let y = self.component_jets(x)?;
        let l2: f64 = (0..3).map(|k| y[k].grad[0] * y[k].grad[0]).sum();
        let mut ups = [0.0; 3];
        for (i, u) in ups.iter_mut().enumerate() {
            let d: f64 = (0..3).map(|k| y[k].grad[0] * y[k].h(i, 0)).sum();
            *u = d / l2;
        }
        Ok(ups)
    }

    /// f∘m as a formula.
    pub fn pullback_expr(&self, e: &Expr) -> Expr {
        let mut comps = [Expr::Var(1), Expr::Var(2), Expr::Var(3)];
        for p in &self.steps {
            let ex = p.as_exprs();
            comps = [0, 1, 2].map(|i| ex[i].substitute(&comps));
        }
        e.substitute(&comps)
    }

    /// Random composition of one to four primitives, scaled so that points in
    /// the unit ball stay at distance ≥ `guard` from every inversion centre.
    pub fn random(rng: &mut impl Rng) -> ConformalMap {
        let n = rng.random_range(1..=4);
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let p = match rng.random_range(0..5) {
                0 => Primitive::Translate([
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]),
                1 => {
                    let mut q = random_rotation(rng);
                    if rng.random_bool(0.3) {
                        q[2] = scale(&q[2], -1.0);
                    }
                    Primitive::Rotate(q)
                }
                2 => Primitive::Reflect {
                    normal: random_unit(rng),
                    offset: rng.random_range(-1.0..1.0),
                },
                3 => Primitive::Dilate(rng.random_range(0.3..3.0)),
                _ => Primitive::Invert {
                    center: [
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    ],
                },
            };
            steps.push(p);
        }
        ConformalMap { steps }
    }

    /// Smallest distance from the path of `x` through the steps to an
    /// inversion centre.
    pub fn pole_distance(&self, x: &Vec3) -> f64 {
        let mut y = *x;
        let mut best = f64::INFINITY;
        for p in &self.steps {
            if let Primitive::Invert { center } = p {
                best = best.min(norm(&sub(&y, center)));
            }
            match p.apply(&y) {
                Ok(z) => y = z,
                Err(_) => return 0.0,
            }
        }
        best
    }
}

/// Jet of f∘m at `point`.
pub fn pullback_jet(m: &ConformalMap, e: &Expr, point: &Vec3) -> Result<Jet3, ConformalError> {
    let comps = m.component_jets(point)?;
    Ok(e.eval_with(&comps)?)
}

/// Derivatives of f with respect to the rescaled metric Ω²δ, given the flat
/// derivatives and Υ = ∇ log Ω (with ∇Υ = ΥΥ − ½|Υ|²δ).
pub fn jetchange_transform(j: &Jet3, u: &Vec3) -> Jet3 {
    let g = &j.grad;
    let h = j.hess.to_full();
    let uf = dot(u, g);
    let uu = dot(u, u);
    let uh = mat_vec(&h, u);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut out = *j;
    for (s, &(a, b)) in PAIRS.iter().enumerate() {
        out.hess.0[s] = h[a][b] - u[a] * g[b] - u[b] * g[a] + delta(a, b) * uf;
    }
    for (s, &(a, b, c)) in TRIPLES.iter().enumerate() {
        let v = j.t(a, b, c) - 2.0 * (u[a] * h[b][c] + u[b] * h[a][c] + u[c] * h[a][b])
            + (delta(a, b) * uh[c] + delta(a, c) * uh[b] + delta(b, c) * uh[a])
            + 2.0 * (u[a] * u[b] * g[c] + u[a] * u[c] * g[b] + u[b] * u[c] * g[a])
            - (delta(a, b) * u[c] + delta(a, c) * u[b] + delta(b, c) * u[a]) * uf
            - 0.5 * uu * (delta(a, b) * g[c] + delta(a, c) * g[b] + delta(b, c) * g[a]);
        out.third.0[s] = v;
    }
    out
}

/// Jet of f at `y` expressed in the frame `x ↦ m(x)`: every derivative index
/// contracted with the Jacobian D m(x).
pub fn pull_frame(jet_at_image: &Jet3, dm: &Mat3) -> Jet3 {
    // Rows of `q` must map image components to source components: q = Dmᵀ.
    jet_at_image.rotated(&transpose(dm))
}

/// Relative mismatch |a − b| / (|a| + |b| + floor).
pub fn mismatch(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + floor + 1e-300)
}

/// Relative floor applied to natural scales in weight tests.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Residual of I(f∘m)(x) − s·λ(x)^(−w)·I(f)(m(x)) with an explicit sign s.
pub fn weight_residual_signed(
    e: &Expr,
    m: &ConformalMap,
    point: &Vec3,
    inv: Invariant,
    sign: f64,
) -> Result<f64, ConformalError> {
    let lhs_jet = pullback_jet(m, e, point)?;
    let y = m.apply(point)?;
    let rhs_jet = e.eval_jet(y)?;
    let lam = m.factor(point)?;
    let lhs = invariant_set(&lhs_jet).get(inv);
    let rhs = sign * lam.powi(-inv.weight()) * invariant_set(&rhs_jet).get(inv);
    let floor = WEIGHT_FLOOR * natural_scale(&lhs_jet, inv.weight(), inv.degree());
    Ok(mismatch(lhs, rhs, floor))
}

/// Weight test with the orientation sign applied to odd invariants only.
pub fn weight_test(
    e: &Expr,
    m: &ConformalMap,
    point: &Vec3,
    inv: Invariant,
) -> Result<f64, ConformalError> {
    let s = if inv.is_odd() { m.orientation() } else { 1.0 };
    weight_residual_signed(e, m, point, inv, s)
}

/// Same comparison through the rescaling law: transform the jet of f∘m with
/// Υ = ∇ log λ, contract in the metric λ²δ, compare with I(f)(m(x)).
pub fn jetchange_route_residual(
    e: &Expr,
    m: &ConformalMap,
    point: &Vec3,
    inv: Invariant,
) -> Result<f64, ConformalError> {
    let lhs_jet = pullback_jet(m, e, point)?;
    let hat = jetchange_transform(&lhs_jet, &m.upsilon(point)?);
    let lam = m.factor(point)?;
    let s = if inv.is_odd() { m.orientation() } else { 1.0 };
    // Each contraction with the rescaled inverse metric contributes λ^(−2).
    let rescaled = lam.powi(inv.weight()) * invariant_set(&hat).get(inv);
    let y = m.apply(point)?;
    let rhs_jet = e.eval_jet(y)?;
    let rhs = s * invariant_set(&rhs_jet).get(inv);
    let floor = WEIGHT_FLOOR * natural_scale(&rhs_jet, inv.weight(), inv.degree());
    Ok(mismatch(rescaled, rhs, floor))
}

/// The conformally covariant pairings of two tensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingKind {
    /// ψ × φ ↦ vψ∇φ − wφ∇ψ.
    ScalarScalar,
    /// ψ_i × φ ↦ (v+1)ψ^i∇_iφ − wφ∇_iψ^i.
    Divergence,
    /// ψ_i × φ ↦ vψ_[i∇_j]φ + wφ∇_[iψ_j].
    Skew,
    /// ψ_i × φ ↦ symmetric trace-free combination.
    TraceFree,
    /// ψ × φ_ij ↦ vψ∇^iφ_ij − (w+1)φ_ij∇^iψ.
    TensorDivergence,
    /// ψ × φ_ij ↦ symmetric trace-free 3-tensor.
    TensorCubic,
}

impl PairingKind {
    pub const ALL: [PairingKind; 6] = [
        PairingKind::ScalarScalar,
        PairingKind::Divergence,
        PairingKind::Skew,
        PairingKind::TraceFree,
        PairingKind::TensorDivergence,
        PairingKind::TensorCubic,
    ];
}

/// Weighted fields and their first derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingInputs {
    pub v: f64,
    pub w: f64,
    pub psi: f64,
    pub dpsi: Vec3,
    /// Covector ψ_i and dpsi_vec[i][j] = ∇_i ψ_j.
    pub psi_vec: Vec3,
    pub dpsi_vec: Mat3,
    pub phi: f64,
    pub dphi: Vec3,
    /// Symmetric trace-free φ_ij and dphi_ten[k][i][j] = ∇_k φ_ij.
    pub phi_ten: Mat3,
    pub dphi_ten: [[[f64; 3]; 3]; 3],
}

impl PairingInputs {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut r = || rng.random_range(-1.0f64..1.0);
        let v = (r() * 6.0).round();
        let w = (r() * 6.0).round();
        let psi = r();
        let dpsi = [r(), r(), r()];
        let psi_vec = [r(), r(), r()];
        let mut dpsi_vec = [[0.0; 3]; 3];
        dpsi_vec.iter_mut().flatten().for_each(|x| *x = r());
        let phi = r();
        let dphi = [r(), r(), r()];
        let mut phi_ten = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                phi_ten[i][j] = r();
                phi_ten[j][i] = phi_ten[i][j];
            }
        }
        let tr = (phi_ten[0][0] + phi_ten[1][1] + phi_ten[2][2]) / 3.0;
        for (i, row) in phi_ten.iter_mut().enumerate() {
            row[i] -= tr;
        }
        let mut dphi_ten = [[[0.0; 3]; 3]; 3];
        for slab in dphi_ten.iter_mut() {
            for i in 0..3 {
                for j in i..3 {
                    slab[i][j] = r();
                    slab[j][i] = slab[i][j];
                }
            }
            let tr = (slab[0][0] + slab[1][1] + slab[2][2]) / 3.0;
            for (i, row) in slab.iter_mut().enumerate() {
                row[i] -= tr;
            }
        }
        PairingInputs {
            v,
            w,
            psi,
            dpsi,
            psi_vec,
            dpsi_vec,
            phi,
            dphi,
            phi_ten,
            dphi_ten,
        }
    }

    /// The same fields seen by the rescaled metric at a point where Ω = 1
    /// and ∇ log Ω = Υ.
    pub fn rescaled(&self, u: &Vec3) -> Self {
        let mut out = *self;
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..3 {
            out.dpsi[i] = self.dpsi[i] + self.v * u[i] * self.psi;
            out.dphi[i] = self.dphi[i] + self.w * u[i] * self.phi;
        }
        let up = dot(u, &self.psi_vec);
        for i in 0..3 {
            for j in 0..3 {
                out.dpsi_vec[i][j] = self.dpsi_vec[i][j] + self.v * u[i] * self.psi_vec[j]
                    - u[i] * self.psi_vec[j]
                    - u[j] * self.psi_vec[i]
                    + delta(i, j) * up;
            }
        }
        let uphi = mat_vec(&self.phi_ten, u);
        let p = &self.phi_ten;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    out.dphi_ten[k][i][j] = self.dphi_ten[k][i][j] + self.w * u[k] * p[i][j]
                        - 2.0 * u[k] * p[i][j]
                        - u[i] * p[k][j]
                        - u[j] * p[i][k]
                        + delta(k, i) * uphi[j]
                        + delta(k, j) * uphi[i];
                }
            }
        }
        out
    }

    /// Components of the pairing of the given kind.
    pub fn evaluate(&self, kind: PairingKind) -> Vec<f64> {
        let (v, w) = (self.v, self.w);
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        match kind {
            PairingKind::ScalarScalar => {
                scalar_pairing(self.psi, &self.dpsi, v, self.phi, &self.dphi, w).to_vec()
            }
            PairingKind::Divergence => {
                let div = self.dpsi_vec[0][0] + self.dpsi_vec[1][1] + self.dpsi_vec[2][2];
                vec![(v + 1.0) * dot(&self.psi_vec, &self.dphi) - w * self.phi * div]
            }
            PairingKind::Skew => {
                let mut out = Vec::with_capacity(9);
                for i in 0..3 {
                    for j in 0..3 {
                        let a = 0.5 * (self.psi_vec[i] * self.dphi[j] - self.psi_vec[j] * self.dphi[i]);
                        let b = 0.5 * (self.dpsi_vec[i][j] - self.dpsi_vec[j][i]);
                        out.push(v * a + w * self.phi * b);
                    }
                }
                out
            }
            PairingKind::TraceFree => {
                let pd = dot(&self.psi_vec, &self.dphi);
                let div = self.dpsi_vec[0][0] + self.dpsi_vec[1][1] + self.dpsi_vec[2][2];
                let mut out = Vec::with_capacity(9);
                for i in 0..3 {
                    for j in 0..3 {
                        let a = 0.5 * (self.psi_vec[i] * self.dphi[j] + self.psi_vec[j] * self.dphi[i])
                            - delta(i, j) * pd / 3.0;
                        let b = 0.5 * (self.dpsi_vec[i][j] + self.dpsi_vec[j][i]) - delta(i, j) * div / 3.0;
                        out.push((v - 2.0) * a - w * self.phi * b);
                    }
                }
                out
            }
            PairingKind::TensorDivergence => {
                let mut out = Vec::with_capacity(3);
                for j in 0..3 {
                    let div: f64 = (0..3).map(|i| self.dphi_ten[i][i][j]).sum();
                    let pd: f64 = (0..3).map(|i| self.phi_ten[i][j] * self.dpsi[i]).sum();
                    out.push(v * self.psi * div - (w + 1.0) * pd);
                }
                out
            }
            PairingKind::TensorCubic => {
                let p = &self.phi_ten;
                let dp = &self.dphi_ten;
                let mut div = [0.0; 3];
                let mut pd = [0.0; 3];
                for k in 0..3 {
                    div[k] = (0..3).map(|l| dp[l][k][l]).sum();
                    pd[k] = (0..3).map(|l| p[k][l] * self.dpsi[l]).sum();
                }
                let mut a = [[[0.0; 3]; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            a[i][j][k] = v * self.psi * (dp[i][j][k] - 0.4 * delta(i, j) * div[k])
                                - (w - 4.0) * (p[i][j] * self.dpsi[k] - 0.4 * delta(i, j) * pd[k]);
                        }
                    }
                }
                let mut out = Vec::with_capacity(27);
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            out.push(
                                (a[i][j][k] + a[i][k][j] + a[j][i][k] + a[j][k][i] + a[k][i][j]
                                    + a[k][j][i])
                                    / 6.0,
                            );
                        }
                    }
                }
                out
            }
        }
    }
}

/// Largest componentwise mismatch of a pairing before and after rescaling.
pub fn pairing_test(kind: PairingKind, inputs: &PairingInputs, upsilon: &Vec3) -> f64 {
    let a = inputs.evaluate(kind);
    let b = inputs.rescaled(upsilon).evaluate(kind);
    let scale: f64 = a.iter().chain(b.iter()).map(|x| x.abs()).fold(0.0, f64::max);
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / (scale + 1e-300))
        .fold(0.0, f64::max)
}

/// First pairing applied to (J, Z) of a jet and of its rescaled jet.
pub fn jz_pairing_residual(jet: &Jet3, upsilon: &Vec3) -> f64 {
    let a = tensor_set(jet);
    let b = tensor_set(&jetchange_transform(jet, upsilon));
    let pa = scalar_pairing(a.j, &a.grad_j, -2.0, a.z, &a.grad_z, -4.0);
    let pb = scalar_pairing(b.j, &b.grad_j, -2.0, b.z, &b.grad_z, -4.0);
    let scale = pa.iter().chain(pb.iter()).map(|x| x.abs()).fold(0.0, f64::max);
    (0..3)
        .map(|i| (pa[i] - pb[i]).abs() / (scale + 1e-300))
        .fold(0.0, f64::max)
}
