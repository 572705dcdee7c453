//! Catalogue of worked examples: functions with known conjugates, functions
//! without, and the expected pointwise verdicts. Shared by the tests and the
//! command line.

use rand::Rng;

use crate::directions::DirectionClass;
use crate::expr::{parse, EvalError, Expr};
use crate::tensor::Vec3;

/// What the classifier should report on the entry's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Expected {
    pub class: DirectionClass,
    /// Whether the integrability verdict admits a conjugate.
    pub admits: bool,
}

/// Where an entry is sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    /// The box [lo, hi]³ minus a tube of radius `guard` about the x₁-axis.
    OffAxis { lo: f64, hi: f64, guard: f64 },
    /// The box [lo, hi]³ (no excluded set inside it).
    Box { lo: f64, hi: f64 },
}

impl Domain {
    pub fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Domain::OffAxis { lo, hi, guard } => {
                p.iter().all(|c| (lo..=hi).contains(c)) && p[1].hypot(p[2]) > guard
            }
            Domain::Box { lo, hi } => p.iter().all(|c| (lo..=hi).contains(c)),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        let (lo, hi) = match *self {
            Domain::OffAxis { lo, hi, .. } | Domain::Box { lo, hi } => (lo, hi),
        };
        loop {
            let p = [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)];
            if self.contains(&p) {
                return p;
            }
        }
    }

    pub fn samples(&self, rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub f: Expr,
    pub g: Option<Expr>,
    pub expected: Expected,
    pub domain: Domain,
    pub singular_set: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub note: &'static str,
}

fn expr(src: &str) -> Expr {
    parse(src).unwrap_or_else(|e| panic!("gallery formula {src:?}: {e}"))
}

const R2: &str = "(x1^2+x2^2+x3^2)";
const RHO2: &str = "(x2^2+x3^2)";

fn admits(class: DirectionClass) -> Expected {
    Expected { class, admits: true }
}

fn rejects(class: DirectionClass) -> Expected {
    Expected { class, admits: false }
}

/// The pair built from a solution h(x, y) of the two-variable equation:
/// f = x₂ h(x₁, x₂² + x₃²), g = x₃ h(x₁, x₂² + x₃²).
pub fn ansatz_pair(h: &Expr) -> (Expr, Expr) {
    let inner = h.substitute(&[expr("x1"), expr(RHO2), Expr::Constant(0.0)]);
    let f = Expr::Binary(crate::expr::BinOp::Mul, Box::new(Expr::Var(2)), Box::new(inner.clone()));
    let g = Expr::Binary(crate::expr::BinOp::Mul, Box::new(Expr::Var(3)), Box::new(inner));
    (f, g)
}

/// Product solution b·e^{cx}·e^{√(1−c²y)} / (1 + √(1−c²y)) in the variables
/// x = x1, y = x2.
pub fn ansatz_product(b: f64, c: f64) -> Expr {
    let s = format!("sqrt(1 - {:?}*x2)", c * c);
    expr(&format!("{b:?}*exp({c:?}*x1)*exp({s})/(1 + {s})"))
}

/// (∂h/∂x)² + 4y(∂h/∂y)² + 4h ∂h/∂y at (x, y), with h written in x1, x2.
pub fn ansatz_residual(h: &Expr, point: [f64; 2]) -> Result<f64, EvalError> {
    let j = h.eval_jet([point[0], point[1], 0.0])?;
    let (hx, hy) = (j.grad[0], j.grad[1]);
    Ok(hx * hx + 4.0 * point[1] * hy * hy + 4.0 * j.value * hy)
}

/// Cylindrically symmetric f with f′² = A/ρ² + C, and g = √C x₁ − √A atan2(x₃, x₂).
pub fn cylindrical(a: f64, c: f64) -> (Expr, Expr) {
    let (sa, sc) = (a.sqrt(), c.sqrt());
    let f = if c > 0.0 {
        let s = format!("sqrt({a:?} + {c:?}*{RHO2})");
        if a > 0.0 {
            format!("{sa:?}*log(({s} - {sa:?})/({sc:?}*sqrt{RHO2})) + {s}")
        } else {
            s
        }
    } else {
        format!("{sa:?}*log(sqrt{RHO2})")
    };
    (expr(&f), expr(&format!("{sc:?}*x1 - {sa:?}*atan2(x3, x2)")))
}

fn off_axis(lo: f64, hi: f64) -> Domain {
    Domain::OffAxis { lo, hi, guard: 0.2 }
}

/// Every catalogued example.
pub fn list_entries() -> Vec<GalleryEntry> {
    use DirectionClass::*;
    let mut out = Vec::new();
    let mut push = |name, f: Expr, g: Option<Expr>, expected, domain, singular_set, params, note| {
        out.push(GalleryEntry { name, f, g, expected, domain, singular_set, params, note })
    };

    push(
        "intro-pair-1",
        expr(&format!("x2*{R2}/{RHO2}")),
        Some(expr(&format!("x3*{R2}/{RHO2}"))),
        admits(TwoDistinct),
        off_axis(-1.0, 1.0),
        "x1-axis",
        vec![],
        "rotationally symmetric pair; the h = x^2/y + 1 case of the ansatz",
    );
    push(
        "hopf",
        expr(&format!("((1 - {R2})*x2 + 2*x1*x3)/{RHO2}")),
        Some(expr(&format!("((1 - {R2})*x3 - 2*x1*x2)/{RHO2}"))),
        admits(FourDistinct),
        off_axis(-1.0, 1.0),
        "x1-axis",
        vec![],
        "Hopf fibration S^3 -> S^2 in stereographic coordinates",
    );
    push(
        "log-arccos",
        expr(&format!("log(sqrt{R2})")),
        Some(expr(&format!("acos(x1/sqrt{R2})"))),
        admits(InfinitelyMany),
        off_axis(-1.0, 1.0),
        "x1-axis (for g); origin (for f)",
        vec![],
        "log r with the polar angle as conjugate",
    );
    push(
        "x1x2x3",
        expr("x1*x2*x3"),
        None,
        rejects(NoneReal),
        Domain::Box { lo: 0.2, hi: 1.2 },
        "coordinate planes",
        vec![],
        "X = 6 f^2 > 0, so no conjugate on any open set",
    );
    push(
        "quadratic-pair",
        expr("(x1^2 - x2^2 - x3^2)/2"),
        Some(expr(&format!("x1*sqrt{RHO2}"))),
        admits(TwoDistinct),
        off_axis(-1.0, 1.0),
        "x1-axis; critical point at the origin",
        vec![],
        "the only quadratic with a conjugate, halved so that the pair is exact",
    );
    for (name, a, c) in [("cylindrical", 1.0, 1.0), ("cylindrical-2-half", 2.0, 0.5)] {
        let (f, g) = cylindrical(a, c);
        push(
            name,
            f,
            Some(g),
            admits(FourDistinct),
            Domain::OffAxis { lo: -1.0, hi: 1.0, guard: 0.2 },
            "x1-axis",
            vec![("A", a), ("C", c)],
            "level sets are coaxial cylinders; fibres are helices",
        );
    }
    push(
        "eikonal-radius",
        expr(&format!("sqrt{RHO2}")),
        Some(expr("x1")),
        admits(TwoDistinct),
        off_axis(-1.0, 1.0),
        "x1-axis",
        vec![("A", 0.0), ("C", 1.0)],
        "two-variable f with constant |grad f|; the conjugate direction is along x1",
    );
    push(
        "cylinder-sqrt",
        expr(&format!("{RHO2}^0.25")),
        None,
        rejects(FourDistinct),
        off_axis(-1.0, 1.0),
        "x1-axis",
        vec![],
        "real directions exist but the field is not closed",
    );
    push(
        "cylinder-square",
        expr(RHO2),
        None,
        rejects(NoneReal),
        off_axis(-1.0, 1.0),
        "x1-axis",
        vec![],
        "X > 0 off the axis",
    );
    push(
        "spherical-log",
        expr(&format!("log(sqrt{R2})")),
        None,
        admits(InfinitelyMany),
        Domain::OffAxis { lo: -1.0, hi: 1.0, guard: 0.05 },
        "origin",
        vec![],
        "X = Y = 0; any conjugate solves an eikonal equation on spheres",
    );
    for (name, b, c) in [("ansatz-product", 1.0, 0.5), ("ansatz-product-2", 0.7, -0.3)] {
        let h = ansatz_product(b, c);
        let (f, g) = ansatz_pair(&h);
        push(
            name,
            f,
            Some(g),
            admits(TwoDistinct),
            off_axis(-1.0, 1.0),
            "x1-axis",
            vec![("b", b), ("c", c)],
            "product solution of the ansatz equation",
        );
    }
    push(
        "xyzero-linear",
        expr("x1"),
        Some(expr("x2")),
        admits(InfinitelyMany),
        Domain::Box { lo: -1.0, hi: 1.0 },
        "none",
        vec![],
        "linear function",
    );
    push(
        "xyzero-log",
        expr(&format!("log(sqrt{R2})")),
        Some(expr(&format!("acos(x1/sqrt{R2})"))),
        admits(InfinitelyMany),
        off_axis(-1.0, 1.0),
        "origin",
        vec![],
        "logarithm of the distance to a point",
    );
    push(
        "xyzero-azimuth",
        expr("atan2(x3, x2)"),
        Some(expr(&format!("log(sqrt{RHO2})"))),
        admits(InfinitelyMany),
        off_axis(-1.0, 1.0),
        "x1-axis",
        vec![],
        "angle about an axis",
    );
    push(
        "xyzero-inverted",
        expr(&format!("x1/{R2}")),
        Some(expr(&format!("x2/{R2}"))),
        admits(InfinitelyMany),
        off_axis(-1.0, 1.0),
        "origin",
        vec![],
        "linear function composed with inversion",
    );
    push(
        "harmonic3-linear",
        expr("x1"),
        Some(expr("x2")),
        admits(InfinitelyMany),
        Domain::Box { lo: -1.0, hi: 1.0 },
        "none",
        vec![],
        "Z(f) = Z(g) = 0",
    );
    push(
        "harmonic3-log",
        expr(&format!("log{R2}/2")),
        None,
        admits(InfinitelyMany),
        off_axis(-1.0, 1.0),
        "origin",
        vec![],
        "Z(f) = 0; atan2(x3, x2) is 3-harmonic too but its gradient has length 1/rho, not 1/r, so it is not a conjugate",
    );
    push(
        "harmonic3-inverted",
        expr(&format!("x1/{R2}")),
        Some(expr(&format!("x2/{R2}"))),
        admits(InfinitelyMany),
        off_axis(-1.0, 1.0),
        "origin",
        vec![],
        "Z(f) = Z(g) = 0",
    );
    out
}

/// Looks an entry up by name.
pub fn entry(name: &str) -> Option<GalleryEntry> {
    list_entries().into_iter().find(|e| e.name == name)
}

/// The four normal forms of functions with X = Y = 0, by model name.
pub fn xyzero_models() -> Vec<GalleryEntry> {
    list_entries().into_iter().filter(|e| e.name.starts_with("xyzero-")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let all = list_entries();
        let mut names: Vec<_> = all.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
    }

    #[test]
    fn ansatz_residuals() {
        let h = ansatz_product(1.0, 0.5);
        assert!(ansatz_residual(&h, [0.3, 0.9]).unwrap().abs() < 1e-10);
        let intro = parse("x1^2/x2 + 1").unwrap();
        assert!(ansatz_residual(&intro, [1.0, 2.0]).unwrap().abs() < 1e-10);
        let lin = parse("x1").unwrap();
        assert_eq!(ansatz_residual(&lin, [0.4, 0.5]).unwrap(), 1.0);
    }
}
