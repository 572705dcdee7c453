//! Third-order jets in three variables.
//!
//! A [`Jet3`] holds the value of a function together with all of its partial
//! derivatives up to order three at one point. Arithmetic and elementary
//! functions propagate those derivatives exactly (up to rounding) through the
//! Leibniz rule and the third-order chain rule.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::tensor::{Mat3, SymMat3, SymTensor3, Vec3, PAIRS, TRIPLES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet3 {
    pub value: f64,
    pub grad: Vec3,
    pub hess: SymMat3,
    pub third: SymTensor3,
}

/// Jet of the coordinate function `x_axis` at `point`; `axis` counts from 1.
///
/// # Panics
/// If `axis` is not 1, 2 or 3.
pub fn coordinate_jet(axis: usize, point: Vec3) -> Jet3 {
    assert!((1..=3).contains(&axis), "axis must be 1, 2 or 3");
    Jet3::variable(axis - 1, point[axis - 1])
}

impl Jet3 {
    pub fn constant(c: f64) -> Self {
        Jet3 {
            value: c,
            ..Default::default()
        }
    }

    /// Jet of the 0-based coordinate `i` taking the value `value`.
    pub fn variable(i: usize, value: f64) -> Self {
        let mut grad = [0.0; 3];
        grad[i] = 1.0;
        Jet3 {
            value,
            grad,
            ..Default::default()
        }
    }

    /// The three coordinate jets at `point`.
    pub fn coordinates(point: Vec3) -> [Jet3; 3] {
        [
            Jet3::variable(0, point[0]),
            Jet3::variable(1, point[1]),
            Jet3::variable(2, point[2]),
        ]
    }

    #[inline]
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.hess.get(i, j)
    }

    #[inline]
    pub fn t(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third.get(i, j, k)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.0.iter().all(|v| v.is_finite())
            && self.third.0.iter().all(|v| v.is_finite())
    }

    /// All 20 components, value first.
    pub fn components(&self) -> [f64; 20] {
        let mut c = [0.0; 20];
        c[0] = self.value;
        c[1..4].copy_from_slice(&self.grad);
        c[4..10].copy_from_slice(&self.hess.0);
        c[10..20].copy_from_slice(&self.third.0);
        c
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.value *= c;
        out.grad.iter_mut().for_each(|v| *v *= c);
        out.hess.0.iter_mut().for_each(|v| *v *= c);
        out.third.0.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add_const(&self, c: f64) -> Self {
        let mut out = *self;
        out.value += c;
        out
    }

    fn zip(&self, other: &Jet3, op: impl Fn(f64, f64) -> f64) -> Jet3 {
        let mut out = Jet3::constant(op(self.value, other.value));
        for i in 0..3 {
            out.grad[i] = op(self.grad[i], other.grad[i]);
        }
        for s in 0..6 {
            out.hess.0[s] = op(self.hess.0[s], other.hess.0[s]);
        }
        for s in 0..10 {
            out.third.0[s] = op(self.third.0[s], other.third.0[s]);
        }
        out
    }

    /// Product by the Leibniz rule. Terms are paired so that `a*b` and `b*a`
    /// agree bit for bit.
    pub fn mul_jet(&self, b: &Jet3) -> Jet3 {
        let a = self;
        let mut out = Jet3::constant(a.value * b.value);
        for i in 0..3 {
            out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
        }
        for (s, &(i, j)) in PAIRS.iter().enumerate() {
            out.hess.0[s] = (a.h(i, j) * b.value + a.value * b.h(i, j))
                + (a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i]);
        }
        for (s, &(i, j, k)) in TRIPLES.iter().enumerate() {
            out.third.0[s] = (a.t(i, j, k) * b.value + a.value * b.t(i, j, k))
                + ((a.h(i, j) * b.grad[k] + a.grad[k] * b.h(i, j))
                    + (a.h(i, k) * b.grad[j] + a.grad[j] * b.h(i, k))
                    + (a.h(j, k) * b.grad[i] + a.grad[i] * b.h(j, k)));
        }
        out
    }

    /// Quotient `self / b`, built recursively so that `j / j` is exactly 1.
    pub fn div(&self, b: &Jet3) -> Result<Jet3, JetError> {
        if b.value == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let a = self;
        let bv = b.value;
        let mut q = Jet3::constant(a.value / bv);
        for i in 0..3 {
            q.grad[i] = (a.grad[i] - q.value * b.grad[i]) / bv;
        }
        for (s, &(i, j)) in PAIRS.iter().enumerate() {
            q.hess.0[s] = (a.h(i, j)
                - q.grad[i] * b.grad[j]
                - q.grad[j] * b.grad[i]
                - q.value * b.h(i, j))
                / bv;
        }
        for (s, &(i, j, k)) in TRIPLES.iter().enumerate() {
            let v = a.t(i, j, k)
                - q.hess.get(i, j) * b.grad[k]
                - q.hess.get(i, k) * b.grad[j]
                - q.hess.get(j, k) * b.grad[i]
                - q.grad[i] * b.h(j, k)
                - q.grad[j] * b.h(i, k)
                - q.grad[k] * b.h(i, j)
                - q.value * b.t(i, j, k);
            q.third.0[s] = v / bv;
        }
        Ok(q)
    }

    /// φ∘self given φ and its first three derivatives at `self.value`.
    pub fn compose(&self, d0: f64, d1: f64, d2: f64, d3: f64) -> Jet3 {
        let a = self;
        let mut out = Jet3::constant(d0);
        for i in 0..3 {
            out.grad[i] = d1 * a.grad[i];
        }
        for (s, &(i, j)) in PAIRS.iter().enumerate() {
            out.hess.0[s] = d1 * a.h(i, j) + d2 * a.grad[i] * a.grad[j];
        }
        for (s, &(i, j, k)) in TRIPLES.iter().enumerate() {
            out.third.0[s] = d1 * a.t(i, j, k)
                + d2 * (a.h(i, j) * a.grad[k] + a.h(i, k) * a.grad[j] + a.h(j, k) * a.grad[i])
                + d3 * a.grad[i] * a.grad[j] * a.grad[k];
        }
        out
    }

    pub fn sin(&self) -> Jet3 {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s, -c)
    }

    pub fn cos(&self) -> Jet3 {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c, s)
    }

    pub fn exp(&self) -> Jet3 {
        let e = self.value.exp();
        self.compose(e, e, e, e)
    }

    pub fn log(&self) -> Result<Jet3, JetError> {
        let v = self.value;
        if v <= 0.0 || !v.is_finite() {
            return Err(JetError::Domain { func: "log", value: v });
        }
        let r = 1.0 / v;
        Ok(self.compose(v.ln(), r, -r * r, 2.0 * r * r * r))
    }

    pub fn sqrt(&self) -> Result<Jet3, JetError> {
        let v = self.value;
        if v <= 0.0 || !v.is_finite() {
            return Err(JetError::Domain { func: "sqrt", value: v });
        }
        let r = v.sqrt();
        Ok(self.compose(
            r,
            0.5 / r,
            -0.25 / (r * v),
            0.375 / (r * v * v),
        ))
    }

    pub fn atan(&self) -> Jet3 {
        let v = self.value;
        let w = 1.0 / (1.0 + v * v);
        self.compose(v.atan(), w, -2.0 * v * w * w, (6.0 * v * v - 2.0) * w * w * w)
    }

    pub fn acos(&self) -> Result<Jet3, JetError> {
        let v = self.value;
        if !(v > -1.0 && v < 1.0) {
            return Err(JetError::Domain { func: "acos", value: v });
        }
        let m = 1.0 - v * v;
        let s = m.sqrt();
        Ok(self.compose(
            v.acos(),
            -1.0 / s,
            -v / (m * s),
            -(1.0 + 2.0 * v * v) / (m * m * s),
        ))
    }

    /// `self^p` for constant `p`: any real `p` on a positive base, integer `p`
    /// on any base (nonzero if `p < 0`).
    pub fn pow_const(&self, p: f64) -> Result<Jet3, JetError> {
        let v = self.value;
        let integer = p.fract() == 0.0 && p.abs() < 1e9;
        if !p.is_finite() {
            return Err(JetError::Domain { func: "pow", value: p });
        }
        if integer {
            if p < 0.0 && v == 0.0 {
                return Err(JetError::DivisionByZero);
            }
            let n = p as i32;
            let term = |k: i32| -> f64 {
                let mut c = 1.0;
                for m in 0..k {
                    c *= (n - m) as f64;
                }
                if c == 0.0 {
                    0.0
                } else {
                    c * v.powi(n - k)
                }
            };
            return Ok(self.compose(term(0), term(1), term(2), term(3)));
        }
        if v <= 0.0 {
            return Err(JetError::Domain { func: "pow", value: v });
        }
        let d0 = v.powf(p);
        let d1 = p * v.powf(p - 1.0);
        let d2 = p * (p - 1.0) * v.powf(p - 2.0);
        let d3 = p * (p - 1.0) * (p - 2.0) * v.powf(p - 3.0);
        Ok(self.compose(d0, d1, d2, d3))
    }

    /// Four-quadrant angle of the point (x, y) = (other, self).
    pub fn atan2(&self, x: &Jet3) -> Result<Jet3, JetError> {
        let y = self;
        if y.value == 0.0 && x.value == 0.0 {
            return Err(JetError::Domain { func: "atan2", value: 0.0 });
        }
        // Derivatives come from atan of the better conditioned ratio; the two
        // choices differ by a locally constant angle.
        let mut out = if x.value.abs() >= y.value.abs() {
            y.div(x)?.atan()
        } else {
            -x.div(y)?.atan()
        };
        out.value = y.value.atan2(x.value);
        Ok(out)
    }

    /// Components in the rotated frame: f'_a = Q_ai f_i and likewise for the
    /// higher derivatives.
    pub fn rotated(&self, q: &Mat3) -> Jet3 {
        let mut out = Jet3::constant(self.value);
        for a in 0..3 {
            out.grad[a] = (0..3).map(|i| q[a][i] * self.grad[i]).sum();
        }
        let h = self.hess.to_full();
        for (s, &(a, b)) in PAIRS.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += q[a][i] * q[b][j] * h[i][j];
                }
            }
            out.hess.0[s] = acc;
        }
        let t = self.third.to_full();
        for (s, &(a, b, c)) in TRIPLES.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        acc += q[a][i] * q[b][j] * q[c][k] * t[i][j][k];
                    }
                }
            }
            out.third.0[s] = acc;
        }
        out
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        self.mul_jet(&rhs)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}
