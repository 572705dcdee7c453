//! Seeded random jets, forms and rotations for property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::directions::{scaled_xy, TOL_CLASS};
use crate::expr::Expr;
use crate::jet::Jet3;
use crate::tensor::{cross, dot, norm, scale, sub, Mat3, SymMat3, SymTensor3, Vec3};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Jet with every independent component uniform in [−m, m].
pub fn random_jet(rng: &mut impl Rng, m: f64) -> Jet3 {
    let mut j = Jet3::constant(rng.random_range(-m..m));
    for v in j.grad.iter_mut() {
        *v = rng.random_range(-m..m);
    }
    for v in j.hess.0.iter_mut() {
        *v = rng.random_range(-m..m);
    }
    for v in j.third.0.iter_mut() {
        *v = rng.random_range(-m..m);
    }
    j
}

/// Random jet whose scaled X is clearly negative (four real directions).
pub fn random_jet_x_negative(rng: &mut impl Rng, m: f64) -> Jet3 {
    loop {
        let j = random_jet(rng, m);
        let (_, _, x_rel, _) = scaled_xy(&j);
        if x_rel < -1e3 * TOL_CLASS && norm(&j.grad) > 1e-3 {
            return j;
        }
    }
}

pub fn random_symmetric(rng: &mut impl Rng, m: f64) -> Mat3 {
    let mut s = SymMat3::ZERO;
    for v in s.0.iter_mut() {
        *v = rng.random_range(-m..m);
    }
    s.to_full()
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(&v);
        if n > 0.1 && n <= 1.0 {
            return scale(&v, 1.0 / n);
        }
    }
}

/// Uniformly distributed rotation (determinant +1), rows orthonormal.
pub fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let a = random_unit(rng);
    let b = loop {
        let c = random_unit(rng);
        let d = sub(&c, &scale(&a, dot(&a, &c)));
        if norm(&d) > 0.1 {
            break scale(&d, 1.0 / norm(&d));
        }
    };
    [a, b, cross(&a, &b)]
}

/// Random point in the box [lo, hi]³ at distance > `guard` from the x1-axis.
pub fn random_point_off_axis(rng: &mut impl Rng, lo: f64, hi: f64, guard: f64) -> Vec3 {
    loop {
        let p = [
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
        ];
        if (p[1] * p[1] + p[2] * p[2]).sqrt() > guard {
            return p;
        }
    }
}

/// A symmetric 3-tensor with entries uniform in [−m, m].
pub fn random_sym3(rng: &mut impl Rng, m: f64) -> SymTensor3 {
    let mut t = SymTensor3::ZERO;
    for v in t.0.iter_mut() {
        *v = rng.random_range(-m..m);
    }
    t
}

/// Random formula in x1, x2, x3 that is smooth on all of R³: every
/// logarithm, root, quotient and arccosine is guarded so its argument stays
/// inside the domain.
pub fn random_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    use crate::expr::{BinOp, Func};
    let leaf = |rng: &mut dyn rand::RngCore| -> Expr {
        if rng.random_bool(0.75) {
            Expr::Var(rng.random_range(1..=3))
        } else {
            Expr::Constant((rng.random_range(-2.0f64..2.0) * 8.0).round() / 8.0)
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    let bin = |op, a: Expr, b: Expr| Expr::Binary(op, Box::new(a), Box::new(b));
    let un = |f, a: Expr| Expr::Unary(f, Box::new(a));
    let c = |v: f64| Expr::Constant(v);
    // c + u², positive everywhere
    let pos = |u: Expr, k: f64| bin(BinOp::Add, c(k), Expr::Pow(Box::new(u), 2.0));
    let a = random_expr(rng, depth - 1);
    match rng.random_range(0..12) {
        0 => bin(BinOp::Add, a, random_expr(rng, depth - 1)),
        1 => bin(BinOp::Sub, a, random_expr(rng, depth - 1)),
        2 | 3 => bin(BinOp::Mul, a, random_expr(rng, depth - 1)),
        4 => bin(BinOp::Div, a, pos(random_expr(rng, depth - 1), 1.0)),
        5 => un(Func::Sin, a),
        6 => un(Func::Cos, a),
        7 => un(Func::Exp, un(Func::Sin, a)),
        8 => un(Func::Log, pos(a, 0.5)),
        9 => un(Func::Sqrt, pos(a, 0.5)),
        10 => un(Func::Atan, a),
        _ => match rng.random_range(0..3) {
            0 => un(Func::Acos, bin(BinOp::Div, a.clone(), un(Func::Sqrt, pos(a, 2.0)))),
            1 => bin(BinOp::Atan2, a, pos(random_expr(rng, depth - 1), 1.0)),
            _ => Expr::Pow(Box::new(pos(a, 0.5)), [-1.5, 0.5, 2.5, 3.0][rng.random_range(0..4)]),
        },
    }
}
