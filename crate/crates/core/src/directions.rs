//! Pointwise conjugate directions.
//!
//! A conjugate direction for f at a point is a covector ω with
//!
//! ```text
//! f^i ω_i = 0,   ω^i ω_i = J,   f^{ij} ω_i ω_j + f^{ij} f_i f_j = 0.
//! ```
//!
//! In a frame where ∇f points along e3 and the orthogonal Hessian block is
//! diagonal the system has a closed-form solution, and the number of real
//! solutions is decided by the signs of X and Y.

use std::fmt;

use thiserror::Error;

use crate::invariants::{core_invariants, x_terms, EPS_DEN};
use crate::jet::Jet3;
use crate::tensor::{add, bilinear, cross, dot, mat_vec, norm, scale, transpose, Mat3, Vec3};

/// Below this gradient norm a point is treated as critical.
pub const TOL_GRAD: f64 = 1e-12;
/// Cut-off for the scale-normalised X and Y.
pub const TOL_CLASS: f64 = 1e-8;
/// Accepted relative residual when validating a caller-supplied direction.
pub const CONSTRAINT_TOL: f64 = 1e-7;
/// Relative gap below which two branch candidates count as tied.
pub const TOL_AMBIGUOUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectionError {
    #[error("critical point: |grad f| = {grad_norm:e}")]
    CriticalPoint { grad_norm: f64 },
    #[error("Y vanishes to tolerance (scaled Y = {y_rel:e}); the partner direction is undefined")]
    DegenerateY { y_rel: f64 },
    #[error("direction violates the conjugacy constraints (residuals {0:?})")]
    ConstraintViolation([f64; 3]),
    #[error("branch continuation is ambiguous (scores {best:e} and {runner_up:e})")]
    AmbiguousBranch { best: f64, runner_up: f64 },
    #[error("no discrete branch to continue for class {0}")]
    NoBranch(DirectionClass),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DirectionClass {
    FourDistinct,
    TwoDistinct,
    InfinitelyMany,
    NoneReal,
    CriticalPoint,
}

impl DirectionClass {
    pub fn name(self) -> &'static str {
        match self {
            DirectionClass::FourDistinct => "FourDistinct",
            DirectionClass::TwoDistinct => "TwoDistinct",
            DirectionClass::InfinitelyMany => "InfinitelyMany",
            DirectionClass::NoneReal => "NoneReal",
            DirectionClass::CriticalPoint => "CriticalPoint",
        }
    }
}

impl fmt::Display for DirectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Orthonormal frame with ∇f along the third axis and f_12 = 0, ordered so
/// that f_11 ≤ f_22.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalFrame {
    /// Rows are the frame vectors in the original coordinates.
    pub q: Mat3,
    pub det_q: f64,
    /// The jet expressed in the frame.
    pub rotated: Jet3,
}

impl NormalFrame {
    /// Frame components to original coordinates.
    pub fn to_original(&self, v: &Vec3) -> Vec3 {
        mat_vec(&transpose(&self.q), v)
    }

    pub fn to_frame(&self, v: &Vec3) -> Vec3 {
        mat_vec(&self.q, v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSolution {
    pub class: DirectionClass,
    /// One representative per ± pair.
    pub omegas: Vec<Vec3>,
    pub x: f64,
    pub y: f64,
    pub x_rel: f64,
    pub y_rel: f64,
}

/// Relative residuals of the three defining equations for ω.
pub fn constraint_residuals(jet: &Jet3, omega: &Vec3) -> [f64; 3] {
    let g = &jet.grad;
    let h = jet.hess.to_full();
    let j = dot(g, g);
    let hww = bilinear(&h, omega, omega);
    let hgg = bilinear(&h, g, g);
    let hn = jet.hess.frob_sq().sqrt();
    [
        dot(g, omega).abs() / (norm(g) * norm(omega) + EPS_DEN),
        (dot(omega, omega) - j).abs() / (j + EPS_DEN),
        (hww + hgg).abs() / (hww.abs() + hgg.abs() + j * hn + EPS_DEN),
    ]
}

fn validate(jet: &Jet3, omega: &Vec3) -> Result<(), DirectionError> {
    let r = constraint_residuals(jet, omega);
    if r.iter().all(|v| *v <= CONSTRAINT_TOL) {
        Ok(())
    } else {
        Err(DirectionError::ConstraintViolation(r))
    }
}

fn unit(v: &Vec3) -> Vec3 {
    scale(v, 1.0 / norm(v))
}

pub fn normal_frame(jet: &Jet3) -> Result<NormalFrame, DirectionError> {
    let gn = norm(&jet.grad);
    if !(gn > TOL_GRAD) {
        return Err(DirectionError::CriticalPoint { grad_norm: gn });
    }
    let e3 = scale(&jet.grad, 1.0 / gn);
    let mut axis = 0;
    for i in 1..3 {
        if e3[i].abs() < e3[axis].abs() {
            axis = i;
        }
    }
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let u1 = unit(&add(&a, &scale(&e3, -e3[axis])));
    let u2 = cross(&e3, &u1);

    let h = jet.hess.to_full();
    let p = bilinear(&h, &u1, &u1);
    let b = bilinear(&h, &u1, &u2);
    let c = bilinear(&h, &u2, &u2);
    let theta = if p == c {
        if b == 0.0 {
            0.0
        } else {
            std::f64::consts::FRAC_PI_4.copysign(b)
        }
    } else {
        0.5 * (2.0 * b / (p - c)).atan()
    };
    let (s, co) = theta.sin_cos();
    let mut e1 = add(&scale(&u1, co), &scale(&u2, s));
    let mut e2 = add(&scale(&u1, -s), &scale(&u2, co));
    if bilinear(&h, &e1, &e1) > bilinear(&h, &e2, &e2) {
        // Quarter turn about e3 keeps the frame right-handed.
        let t = e1;
        e1 = e2;
        e2 = scale(&t, -1.0);
    }
    let q = [e1, e2, e3];
    Ok(NormalFrame {
        q,
        det_q: crate::tensor::mat_det(&q),
        rotated: jet.rotated(&q),
    })
}

/// Makes the first clearly nonzero component positive.
pub fn canonical_sign(v: Vec3) -> Vec3 {
    let n = norm(&v);
    for c in v {
        if c.abs() > 1e-12 * n {
            return if c > 0.0 { v } else { scale(&v, -1.0) };
        }
    }
    v
}

/// X and Y divided by the magnitudes of their constituent terms.
pub fn scaled_xy(jet: &Jet3) -> (f64, f64, f64, f64) {
    let core = core_invariants(jet);
    let xs: f64 = x_terms(jet).iter().map(|t| t.abs()).sum::<f64>() + EPS_DEN;
    let h = jet.hess.to_full();
    let ghg = bilinear(&h, &jet.grad, &jet.grad);
    let tr = h[0][0] + h[1][1] + h[2][2];
    let zs = ghg.abs() + core.j * tr.abs();
    let ys = zs * zs + 2.0 * core.j * xs + EPS_DEN;
    (core.x, core.y, core.x / xs, core.y / ys)
}

pub fn classify_xy(x_rel: f64, y_rel: f64) -> DirectionClass {
    if x_rel < -TOL_CLASS {
        DirectionClass::FourDistinct
    } else if x_rel > TOL_CLASS {
        DirectionClass::NoneReal
    } else if y_rel > TOL_CLASS {
        DirectionClass::TwoDistinct
    } else {
        DirectionClass::InfinitelyMany
    }
}

pub fn solve_directions(jet: &Jet3) -> Result<DirectionSolution, DirectionError> {
    let frame = normal_frame(jet)?;
    let (x, y, x_rel, y_rel) = scaled_xy(jet);
    let class = classify_xy(x_rel, y_rel);
    let r = &frame.rotated;
    let f3 = r.grad[2];
    let (f11, f22, f33) = (r.h(0, 0), r.h(1, 1), r.h(2, 2));
    let omegas = match class {
        DirectionClass::NoneReal | DirectionClass::CriticalPoint => Vec::new(),
        DirectionClass::InfinitelyMany => vec![
            canonical_sign(frame.to_original(&[f3.abs(), 0.0, 0.0])),
            canonical_sign(frame.to_original(&[0.0, f3.abs(), 0.0])),
        ],
        DirectionClass::FourDistinct | DirectionClass::TwoDistinct => {
            let f3sq = f3 * f3;
            let w1 = (f3sq * (f22 + f33) / (f22 - f11)).max(0.0).sqrt();
            let mut w2 = (f3sq * (f11 + f33) / (f11 - f22)).max(0.0).sqrt();
            let mut w1 = w1;
            if class == DirectionClass::TwoDistinct {
                // One component vanishes exactly; its computed value is the
                // square root of rounding noise and would make the field rough.
                if w1 < w2 {
                    w1 = 0.0;
                } else {
                    w2 = 0.0;
                }
            }
            let a = canonical_sign(frame.to_original(&[w1, w2, 0.0]));
            if class == DirectionClass::FourDistinct {
                let b = canonical_sign(frame.to_original(&[w1, -w2, 0.0]));
                vec![a, b]
            } else {
                vec![a]
            }
        }
    };
    Ok(DirectionSolution {
        class,
        omegas,
        x,
        y,
        x_rel,
        y_rel,
    })
}

/// Partner direction η from √Y η = 2(f^{jk}f_jω_k) f + (Z − 2f^{jk}f_jf_k) ω − 2J f^{ij}ω_j.
pub fn eta_from_omega(jet: &Jet3, omega: &Vec3, sqrt_y_sign: f64) -> Result<Vec3, DirectionError> {
    let (_, y, _, y_rel) = scaled_xy(jet);
    if !(y_rel > TOL_CLASS) {
        return Err(DirectionError::DegenerateY { y_rel });
    }
    validate(jet, omega)?;
    let core = core_invariants(jet);
    let h = jet.hess.to_full();
    let g = &jet.grad;
    let hw = mat_vec(&h, omega);
    let ghw = dot(g, &hw);
    let ghg = bilinear(&h, g, g);
    let s = sqrt_y_sign.signum() / y.sqrt();
    let mut eta = [0.0; 3];
    for i in 0..3 {
        eta[i] = s * (2.0 * ghw * g[i] + (core.z - 2.0 * ghg) * omega[i] - 2.0 * core.j * hw[i]);
    }
    Ok(eta)
}

/// Picks among ±ω (and ±η) the candidate closest to `prev`.
pub fn continue_branch(prev: &Vec3, sol: &DirectionSolution) -> Result<Vec3, DirectionError> {
    match sol.class {
        DirectionClass::FourDistinct | DirectionClass::TwoDistinct => {}
        other => return Err(DirectionError::NoBranch(other)),
    }
    let mut cands: Vec<(f64, Vec3)> = Vec::with_capacity(4);
    for w in &sol.omegas {
        cands.push((dot(prev, w), *w));
        cands.push((-dot(prev, w), scale(w, -1.0)));
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (best, runner_up) = (cands[0].0, cands[1].0);
    let size = norm(prev) * norm(&cands[0].1);
    if (best - runner_up).abs() <= TOL_AMBIGUOUS * size {
        return Err(DirectionError::AmbiguousBranch { best, runner_up });
    }
    Ok(cands[0].1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::tensor::{frob_sq, identity, mat_mul, sub};
    use approx::assert_relative_eq;

    fn jet(src: &str, p: Vec3) -> Jet3 {
        parse(src).unwrap().eval_jet(p).unwrap()
    }

    #[test]
    fn frame_is_identity_when_already_normal() {
        let j = jet("2*x3 + x1^2 + 3*x2^2 - x3^2", [0.0, 0.0, 0.0]);
        let f = normal_frame(&j).unwrap();
        assert_eq!(f.q, identity());
        assert_eq!(f.det_q, 1.0);
    }

    #[test]
    fn frame_of_triple_product() {
        let f = normal_frame(&jet("x1*x2*x3", [1.0, 1.0, 1.0])).unwrap();
        let r = &f.rotated;
        assert_relative_eq!(r.grad[2], 3f64.sqrt(), max_relative = 1e-14);
        assert!(r.grad[0].abs() < 1e-12 && r.grad[1].abs() < 1e-12);
        assert!(r.h(0, 1).abs() < 1e-12);
        let qqt = mat_mul(&f.q, &transpose(&f.q));
        let mut d = qqt;
        for i in 0..3 {
            d[i][i] -= 1.0;
        }
        assert!(frob_sq(&d).sqrt() < 1e-12);
    }

    #[test]
    fn critical_point() {
        let err = normal_frame(&jet("x1^2", [0.0, 1.0, 1.0])).unwrap_err();
        assert!(matches!(err, DirectionError::CriticalPoint { .. }));
    }

    #[test]
    fn quadratic_unique_direction() {
        let sol = solve_directions(&jet("x1^2-x2^2-x3^2", [1.0, 1.0, 0.0])).unwrap();
        assert_eq!(sol.class, DirectionClass::TwoDistinct);
        assert_eq!(sol.omegas.len(), 1);
        let w = sol.omegas[0];
        assert_relative_eq!(w[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(w[1], 2.0, max_relative = 1e-12);
        assert!(w[2].abs() < 1e-12);
    }

    #[test]
    fn classes_of_simple_functions() {
        let sol = solve_directions(&jet("x1", [0.1, 0.2, 0.3])).unwrap();
        assert_eq!(sol.class, DirectionClass::InfinitelyMany);
        assert_eq!(sol.omegas.len(), 2);
        let sol = solve_directions(&jet("x1*x2*x3", [1.0, 1.0, 1.0])).unwrap();
        assert_eq!(sol.class, DirectionClass::NoneReal);
        assert!(sol.omegas.is_empty());
    }

    #[test]
    fn eta_is_reflected_omega_in_frame() {
        // ∇f = e3, f_11 < f_22, generic third row.
        let j = jet("x3 + 0.5*x1^2 + 2*x2^2 - x3^2 + 0.3*x1*x3 - 0.2*x2*x3", [0.0; 3]);
        let sol = solve_directions(&j).unwrap();
        assert_eq!(sol.class, DirectionClass::FourDistinct);
        let w = sol.omegas[0];
        let eta = eta_from_omega(&j, &w, 1.0).unwrap();
        assert_relative_eq!(eta[0], w[0], max_relative = 1e-12);
        assert_relative_eq!(eta[1], -w[1], max_relative = 1e-12);
        assert!(eta[2].abs() < 1e-12);
        for r in constraint_residuals(&j, &eta) {
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn eta_needs_positive_y() {
        let j = jet("log(sqrt(x1^2+x2^2+x3^2))", [1.0, 0.0, 0.0]);
        let err = eta_from_omega(&j, &[0.0, 1.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, DirectionError::DegenerateY { .. }));
    }

    #[test]
    fn branch_continuation() {
        let j = jet("x3 + 0.5*x1^2 + 2*x2^2 - x3^2 + 0.3*x1*x3", [0.0; 3]);
        let sol = solve_directions(&j).unwrap();
        let (w, e) = (sol.omegas[0], sol.omegas[1]);
        assert_eq!(continue_branch(&w, &sol).unwrap(), w);
        assert_eq!(continue_branch(&scale(&e, -1.0), &sol).unwrap(), scale(&e, -1.0));
        let err = continue_branch(&[0.0, 0.0, 1.0], &sol).unwrap_err();
        assert!(matches!(err, DirectionError::AmbiguousBranch { .. }));
        let near = sub(&w, &scale(&e, 0.01));
        assert_eq!(continue_branch(&near, &sol).unwrap(), w);
    }
}
