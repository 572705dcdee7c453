//! Recovering a conjugate by path integration of the direction field, and
//! checks on candidate pairs.
//!
//! The direction field is multivalued: at a generic point there are four
//! candidate covectors (±ω, ±η). A path integral picks one by continuation,
//! always taking the candidate closest to the one used a moment earlier. Where
//! the candidates come in a whole circle (X = Y = 0) the field is fixed by a
//! pole vector `a` instead: ω is √J times the unit projection of `a` onto the
//! level set. For f = log r and a = −e₁ this reproduces ∇ arccos(x₁/r).

use std::io::{self, Write};

use thiserror::Error;

use crate::directions::{continue_branch, solve_directions, DirectionClass, DirectionError};
use crate::expr::{EvalError, Expr};
use crate::invariants::{core_invariants, natural_scale};
use crate::jet::Jet3;
use crate::tensor::{add, dot, norm, scale, sub, Vec3};

/// Relative agreement required of successive Simpson estimates.
pub const QUAD_TOL: f64 = 1e-10;
/// Circulation over (loop length × largest |ω|) above which a field counts as
/// not closed.
pub const LOOP_TOL: f64 = 1e-6;
/// Pass threshold for [`verify_pair`].
pub const PAIR_TOL: f64 = 1e-9;
/// Default radius of the excluded tube around the x₁-axis.
pub const DEFAULT_GUARD: f64 = 1e-2;

const MAX_DEPTH: usize = 40;
/// Continuation sub-steps per grid edge.
const SUBSTEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("branch continuation failed at {at:?}: {detail}")]
    BranchSwitch { at: Vec3, detail: String },
    #[error("direction field is not closed (relative circulation {residual:e} near {at:?})")]
    NonIntegrable { at: Vec3, residual: f64 },
    #[error("no real conjugate direction at {at:?}")]
    NoDirection { at: Vec3 },
    #[error("singular point {at:?}: {reason}")]
    Singular { at: Vec3, reason: String },
    #[error(transparent)]
    Domain(#[from] EvalError),
}

impl ReconstructError {
    /// True for the failures that mean f has no conjugate on the region.
    pub fn is_non_integrable(&self) -> bool {
        matches!(self, ReconstructError::NonIntegrable { .. } | ReconstructError::NoDirection { .. })
    }
}

/// Regular grid `base + h·(i, j, k)`, `0 ≤ i < counts[0]` and so on, walked as
/// a comb: along x₁ from the base, then x₂, then x₃.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    pub base: Vec3,
    pub h: f64,
    pub counts: [usize; 3],
    /// Direction at the base point the continuation starts from.
    pub seed: Vec3,
    /// Pole for regions where the direction is not discrete; defaults to the seed.
    pub pole: Option<Vec3>,
    /// Radius of the excluded tube around the x₁-axis, if any.
    pub guard: Option<f64>,
    /// Number of elementary plaquettes whose circulation is checked.
    pub loop_checks: usize,
}

impl PathGrid {
    pub fn new(base: Vec3, h: f64, counts: [usize; 3], seed: Vec3) -> Self {
        PathGrid {
            base,
            h,
            counts,
            seed,
            pole: None,
            guard: Some(DEFAULT_GUARD),
            loop_checks: 32,
        }
    }

    pub fn with_pole(mut self, pole: Vec3) -> Self {
        self.pole = Some(pole);
        self
    }

    pub fn with_guard(mut self, guard: Option<f64>) -> Self {
        self.guard = guard;
        self
    }

    pub fn with_loop_checks(mut self, n: usize) -> Self {
        self.loop_checks = n;
        self
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.counts[1] + j) * self.counts[2] + k
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.base[0] + self.h * i as f64,
            self.base[1] + self.h * j as f64,
            self.base[2] + self.h * k as f64,
        ]
    }

    fn field<'a>(&self, e: &'a Expr) -> DirectionField<'a> {
        DirectionField::new(e, self.pole.unwrap_or(self.seed))
    }
}

/// Smallest axis distance over the segment from `a` to `b`.
fn segment_axis_distance(a: &Vec3, b: &Vec3) -> f64 {
    let (ay, az) = (a[1], a[2]);
    let (dy, dz) = (b[1] - a[1], b[2] - a[2]);
    let dd = dy * dy + dz * dz;
    let t = if dd > 0.0 { (-(ay * dy + az * dz) / dd).clamp(0.0, 1.0) } else { 0.0 };
    (ay + t * dy).hypot(az + t * dz)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Discrete,
    Pole,
}

/// Conjugate direction field of one function, evaluated with continuation.
#[derive(Clone, Debug)]
pub struct DirectionField<'a> {
    expr: &'a Expr,
    pole: Vec3,
    mode: Option<Mode>,
}

impl<'a> DirectionField<'a> {
    pub fn new(expr: &'a Expr, pole: Vec3) -> Self {
        DirectionField { expr, pole, mode: None }
    }

    /// The candidate at `x` closest to `reference`.
    pub fn omega(&mut self, x: &Vec3, reference: &Vec3) -> Result<Vec3, ReconstructError> {
        let jet = self.expr.eval_jet(*x)?;
        self.omega_from_jet(&jet, x, reference)
    }

    fn omega_from_jet(&mut self, jet: &Jet3, x: &Vec3, reference: &Vec3) -> Result<Vec3, ReconstructError> {
        let sol = match solve_directions(jet) {
            Ok(s) => s,
            Err(DirectionError::CriticalPoint { grad_norm }) => {
                return Err(ReconstructError::Singular {
                    at: *x,
                    reason: format!("critical point, |grad f| = {grad_norm:e}"),
                })
            }
            Err(e) => return Err(ReconstructError::BranchSwitch { at: *x, detail: e.to_string() }),
        };
        let mode = match sol.class {
            DirectionClass::NoneReal => return Err(ReconstructError::NoDirection { at: *x }),
            DirectionClass::CriticalPoint => {
                return Err(ReconstructError::Singular { at: *x, reason: "critical point".into() })
            }
            DirectionClass::InfinitelyMany => Mode::Pole,
            _ => Mode::Discrete,
        };
        match self.mode {
            None => self.mode = Some(mode),
            Some(m) if m != mode => {
                return Err(ReconstructError::BranchSwitch {
                    at: *x,
                    detail: format!("direction class changed to {} along the path", sol.class),
                })
            }
            _ => {}
        }
        match mode {
            Mode::Discrete => continue_branch(reference, &sol)
                .map_err(|e| ReconstructError::BranchSwitch { at: *x, detail: e.to_string() }),
            Mode::Pole => {
                let g = &jet.grad;
                let j = dot(g, g);
                let t = sub(&self.pole, &scale(g, dot(&self.pole, g) / j));
                let tn = norm(&t);
                if tn <= 1e-12 * norm(&self.pole) {
                    return Err(ReconstructError::Singular {
                        at: *x,
                        reason: "pole is normal to the level set".into(),
                    });
                }
                Ok(scale(&t, j.sqrt() / tn))
            }
        }
    }
}

/// ∫₀¹ f by adaptive Simpson, splitting until halves agree to `tol`.
fn adaptive_simpson<F>(f: &mut F, tol: f64) -> Result<f64, ReconstructError>
where
    F: FnMut(f64) -> Result<f64, ReconstructError>,
{
    let (fa, fm, fb) = (f(0.0)?, f(0.5)?, f(1.0)?);
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    simpson_rec(f, 0.0, 1.0, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, ReconstructError>
where
    F: FnMut(f64) -> Result<f64, ReconstructError>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let w = b - a;
    let left = w * (fa + 4.0 * flm + fm) / 12.0;
    let right = w * (fm + 4.0 * frm + fb) / 12.0;
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || depth >= MAX_DEPTH {
        if depth >= MAX_DEPTH && diff.abs() > 15.0 * tol.max(1e-13 * whole.abs()) {
            return Err(ReconstructError::Singular {
                at: [f64::NAN; 3],
                reason: "quadrature did not converge".into(),
            });
        }
        return Ok(left + right + diff / 15.0);
    }
    let half = (0.5 * tol).max(f64::EPSILON * (left.abs() + right.abs()));
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, half, depth + 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, half, depth + 1)?)
}

/// ∫ ω·dl along the straight segment from `a` to `b`, continuing from
/// `start`. Returns the integral and the direction at `b`.
fn integrate_segment(
    field: &mut DirectionField<'_>,
    a: &Vec3,
    b: &Vec3,
    start: &Vec3,
    panels: Option<usize>,
) -> Result<(f64, Vec3), ReconstructError> {
    let d = sub(b, a);
    let len = norm(&d);
    if len == 0.0 {
        return Ok((0.0, *start));
    }
    let steps = panels.unwrap_or(SUBSTEPS).max(1);
    let mut reference = *start;
    let mut total = 0.0;
    for s in 0..steps {
        let p0 = add(a, &scale(&d, s as f64 / steps as f64));
        let dp = scale(&d, 1.0 / steps as f64);
        let r = reference;
        let mut integrand = |t: f64| -> Result<f64, ReconstructError> {
            let x = add(&p0, &scale(&dp, t));
            let w = field.omega(&x, &r).map_err(|e| locate(e, &x))?;
            Ok(dot(&w, &dp))
        };
        total += if panels.is_some() {
            let (fa, fm, fb) = (integrand(0.0)?, integrand(0.5)?, integrand(1.0)?);
            (fa + 4.0 * fm + fb) / 6.0
        } else {
            let tol = QUAD_TOL * norm(&r) * norm(&dp);
            adaptive_simpson(&mut integrand, tol)?
        };
        let p1 = add(&p0, &dp);
        reference = field.omega(&p1, &r).map_err(|e| locate(e, &p1))?;
    }
    Ok((total, reference))
}

fn locate(e: ReconstructError, x: &Vec3) -> ReconstructError {
    match e {
        ReconstructError::Singular { at, reason } if at[0].is_nan() => {
            ReconstructError::Singular { at: *x, reason }
        }
        other => other,
    }
}

/// Circulation of the continued direction field around a closed polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopResidual {
    pub circulation: f64,
    pub length: f64,
    /// Largest |ω| met at the loop vertices.
    pub omega_scale: f64,
}

impl LoopResidual {
    /// Circulation over length × |ω|; zero for a degenerate loop.
    pub fn relative(&self) -> f64 {
        let s = self.length * self.omega_scale;
        if s == 0.0 {
            0.0
        } else {
            self.circulation.abs() / s
        }
    }
}

/// ∮ ω·dl around `polyline` (closed back to its first vertex), with branch
/// continuation started from `seed` at the first vertex. The seed also serves
/// as the pole where the direction is not discrete.
pub fn loop_residual(e: &Expr, polyline: &[Vec3], seed: &Vec3) -> Result<LoopResidual, ReconstructError> {
    let mut field = DirectionField::new(e, *seed);
    loop_with(&mut field, polyline, seed, None)
}

/// As [`loop_residual`] but with a fixed number of Simpson panels per edge,
/// for convergence studies.
pub fn loop_residual_fixed(
    e: &Expr,
    polyline: &[Vec3],
    seed: &Vec3,
    panels: usize,
) -> Result<LoopResidual, ReconstructError> {
    let mut field = DirectionField::new(e, *seed);
    loop_with(&mut field, polyline, seed, Some(panels))
}

fn loop_with(
    field: &mut DirectionField<'_>,
    polyline: &[Vec3],
    seed: &Vec3,
    panels: Option<usize>,
) -> Result<LoopResidual, ReconstructError> {
    let n = polyline.len();
    let mut out = LoopResidual { circulation: 0.0, length: 0.0, omega_scale: 0.0 };
    if n == 0 {
        return Ok(out);
    }
    let length: f64 = (0..n).map(|i| norm(&sub(&polyline[(i + 1) % n], &polyline[i]))).sum();
    if length == 0.0 {
        return Ok(out);
    }
    let mut w = field.omega(&polyline[0], seed)?;
    out.omega_scale = norm(&w);
    for i in 0..n {
        let (a, b) = (polyline[i], polyline[(i + 1) % n]);
        let (c, next) = integrate_segment(field, &a, &b, &w, panels)?;
        out.circulation += c;
        w = next;
        out.omega_scale = out.omega_scale.max(norm(&w));
    }
    out.length = length;
    Ok(out)
}

/// Values of the reconstructed conjugate on the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub grid: PathGrid,
    pub points: Vec<Vec3>,
    pub values: Vec<f64>,
    /// Continued direction at each node.
    pub omegas: Vec<Vec3>,
    /// Worst relative plaquette circulation found.
    pub loop_max: f64,
    pub loops_checked: usize,
}

impl SampledField {
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// Index of the node nearest to `p`.
    pub fn nearest(&self, p: &Vec3) -> usize {
        let g = &self.grid;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - g.base[a]) / g.h).round();
            idx[a] = (t.max(0.0) as usize).min(g.counts[a] - 1);
        }
        g.index(idx[0], idx[1], idx[2])
    }

    /// Writes `x1,x2,x3,g` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x1,x2,x3,g")?;
        for (p, v) in self.points.iter().zip(&self.values) {
            writeln!(out, "{:e},{:e},{:e},{:e}", p[0], p[1], p[2], v)?;
        }
        Ok(())
    }

    /// Largest |g − reference| after matching the two at the base point.
    pub fn max_error_against(&self, reference: &Expr) -> Result<f64, EvalError> {
        let r0 = reference.eval(self.grid.base)?;
        let mut worst: f64 = 0.0;
        for (p, v) in self.points.iter().zip(&self.values) {
            let r = reference.eval(*p)? - r0;
            worst = worst.max((r - v).abs());
        }
        Ok(worst)
    }
}

fn check_guard(grid: &PathGrid, a: &Vec3, b: &Vec3) -> Result<(), ReconstructError> {
    if let Some(rho) = grid.guard {
        if segment_axis_distance(a, b) < rho {
            return Err(ReconstructError::Singular {
                at: *b,
                reason: format!("path enters the guard tube of radius {rho:e} about the x1-axis"),
            });
        }
    }
    Ok(())
}

struct Walk<'g, 'f, 'e> {
    grid: &'g PathGrid,
    field: &'f mut DirectionField<'e>,
    values: &'f mut [f64],
    omegas: &'f mut [Vec3],
}

impl Walk<'_, '_, '_> {
    fn step(&mut self, from: usize, to: usize, a: Vec3, b: Vec3) -> Result<(), ReconstructError> {
        check_guard(self.grid, &a, &b)?;
        let (c, w) = integrate_segment(self.field, &a, &b, &self.omegas[from], None)?;
        self.values[to] = self.values[from] + c;
        self.omegas[to] = w;
        Ok(())
    }
}

/// Integrates the conjugate direction field of `e` over the grid, starting
/// from g(base) = 0, and checks a spread of elementary plaquettes for
/// vanishing circulation.
pub fn reconstruct_g(e: &Expr, grid: &PathGrid) -> Result<SampledField, ReconstructError> {
    let [n1, n2, n3] = grid.counts;
    if grid.is_empty() {
        return Err(ReconstructError::Singular { at: grid.base, reason: "empty grid".into() });
    }
    let mut field = grid.field(e);
    let total = grid.len();
    let mut values = vec![0.0; total];
    let mut omegas = vec![[0.0; 3]; total];
    let mut points = vec![[0.0; 3]; total];
    check_guard(grid, &grid.base, &grid.base)?;
    let w0 = field.omega(&grid.base, &grid.seed)?;
    omegas[0] = w0;
    points[0] = grid.base;
    let mut walk = Walk { grid, field: &mut field, values: &mut values, omegas: &mut omegas };
    for i in 0..n1 {
        let here = grid.index(i, 0, 0);
        points[here] = grid.node(i, 0, 0);
        if i > 0 {
            let prev = grid.index(i - 1, 0, 0);
            walk.step(prev, here, grid.node(i - 1, 0, 0), points[here])?;
        }
        for j in 0..n2 {
            let row = grid.index(i, j, 0);
            points[row] = grid.node(i, j, 0);
            if j > 0 {
                let prev = grid.index(i, j - 1, 0);
                walk.step(prev, row, grid.node(i, j - 1, 0), points[row])?;
            }
            for k in 1..n3 {
                let idx = grid.index(i, j, k);
                points[idx] = grid.node(i, j, k);
                walk.step(idx - 1, idx, grid.node(i, j, k - 1), points[idx])?;
            }
        }
    }
    let mut out = SampledField {
        grid: grid.clone(),
        points,
        values,
        omegas,
        loop_max: 0.0,
        loops_checked: 0,
    };
    for (corner, plane) in plaquettes(grid) {
        let loop_pts = plaquette(grid, corner, plane);
        let seed = out.omegas[grid.index(corner[0], corner[1], corner[2])];
        let mut f = grid.field(e);
        let r = loop_with(&mut f, &loop_pts, &seed, None)?;
        out.loops_checked += 1;
        out.loop_max = out.loop_max.max(r.relative());
        if r.relative() > LOOP_TOL {
            return Err(ReconstructError::NonIntegrable { at: loop_pts[0], residual: r.relative() });
        }
    }
    Ok(out)
}

/// Corners and planes (0: x₁x₂, 1: x₁x₃, 2: x₂x₃) of the plaquettes to check,
/// spread evenly through the grid.
fn plaquettes(grid: &PathGrid) -> Vec<([usize; 3], usize)> {
    let mut all = Vec::new();
    let c = grid.counts;
    for plane in 0..3 {
        let (a, b) = [(0, 1), (0, 2), (1, 2)][plane];
        if c[a] < 2 || c[b] < 2 {
            continue;
        }
        for i in 0..c[0] {
            for j in 0..c[1] {
                for k in 0..c[2] {
                    let idx = [i, j, k];
                    if idx[a] + 1 < c[a] && idx[b] + 1 < c[b] {
                        all.push((idx, plane));
                    }
                }
            }
        }
    }
    if all.len() <= grid.loop_checks {
        return all;
    }
    let n = grid.loop_checks;
    (0..n).map(|t| all[t * all.len() / n]).collect()
}

fn plaquette(grid: &PathGrid, corner: [usize; 3], plane: usize) -> Vec<Vec3> {
    let (a, b) = [(0, 1), (0, 2), (1, 2)][plane];
    let mut p = [corner; 4];
    p[1][a] += 1;
    p[2][a] += 1;
    p[2][b] += 1;
    p[3][b] += 1;
    p.iter().map(|q| grid.node(q[0], q[1], q[2])).collect()
}

/// g at an arbitrary point, by integrating from the nearest grid node.
pub fn probe(e: &Expr, sampled: &SampledField, p: &Vec3) -> Result<f64, ReconstructError> {
    let idx = sampled.nearest(p);
    let mut field = sampled.grid.field(e);
    let node = sampled.points[idx];
    let (c, _) = integrate_segment(&mut field, &node, p, &sampled.omegas[idx], None)?;
    Ok(sampled.values[idx] + c)
}

/// Gradient of the reconstructed g at `p` by central differences of [`probe`].
pub fn probe_gradient(e: &Expr, sampled: &SampledField, p: &Vec3, delta: f64) -> Result<Vec3, ReconstructError> {
    let mut grad = [0.0; 3];
    for a in 0..3 {
        let mut plus = *p;
        let mut minus = *p;
        plus[a] += delta;
        minus[a] -= delta;
        grad[a] = (probe(e, sampled, &plus)? - probe(e, sampled, &minus)?) / (2.0 * delta);
    }
    Ok(grad)
}

/// Worst-case violations of the conjugacy conditions over a sample set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairReport {
    /// max | |∇f| − |∇g| | / |∇f|
    pub norm_mismatch: f64,
    /// max |⟨∇f, ∇g⟩| / (|∇f| |∇g|)
    pub orthogonality: f64,
    pub samples: usize,
}

impl PairReport {
    pub fn passes(&self) -> bool {
        self.norm_mismatch < PAIR_TOL && self.orthogonality < PAIR_TOL
    }

    pub fn worst(&self) -> f64 {
        self.norm_mismatch.max(self.orthogonality)
    }
}

/// Checks |∇f| = |∇g| and ∇f ⟂ ∇g at every sample.
pub fn verify_pair(ef: &Expr, eg: &Expr, samples: &[Vec3]) -> Result<PairReport, EvalError> {
    let mut rep = PairReport { norm_mismatch: 0.0, orthogonality: 0.0, samples: samples.len() };
    for p in samples {
        let gf = ef.eval_jet(*p)?.grad;
        let gg = eg.eval_jet(*p)?.grad;
        let (nf, ng) = (norm(&gf), norm(&gg));
        let mismatch = ((nf - ng) / nf).abs();
        let ortho = (dot(&gf, &gg) / (nf * ng)).abs();
        // NaN must fail, so compare through max_nan
        rep.norm_mismatch = max_nan(rep.norm_mismatch, mismatch);
        rep.orthogonality = max_nan(rep.orthogonality, ortho);
    }
    Ok(rep)
}

fn max_nan(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Residuals of the identities relating the invariants of a conjugate pair,
/// each the worst over the samples of |lhs − rhs| / max(|lhs| + |rhs|, scale).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RelationsReport {
    /// X(f) − X(g)
    pub x_equal: f64,
    /// X(f + εg) − (1 + ε²)² X(f)
    pub x_sum: f64,
    /// Z(f + εg) − (1 + ε²)(Z(f) + εZ(g))
    pub z_sum: f64,
    /// f^{ij} g_{ij} − (Δf)(Δg)
    pub hessian_pairing: f64,
    /// Z(g) − (f^{ij} f_i g_j + J Δg)
    pub z_linearised: f64,
}

impl RelationsReport {
    pub fn max(&self) -> f64 {
        [self.x_equal, self.x_sum, self.z_sum, self.hessian_pairing, self.z_linearised]
            .into_iter()
            .fold(0.0, max_nan)
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("x_equal", self.x_equal),
            ("x_sum", self.x_sum),
            ("z_sum", self.z_sum),
            ("hessian_pairing", self.hessian_pairing),
            ("z_linearised", self.z_linearised),
        ]
    }
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(floor)
}

pub fn conjugate_relations(
    ef: &Expr,
    eg: &Expr,
    samples: &[Vec3],
    eps: f64,
) -> Result<RelationsReport, EvalError> {
    let mut rep = RelationsReport::default();
    for p in samples {
        let jf = ef.eval_jet(*p)?;
        let jg = eg.eval_jet(*p)?;
        let js = jf + jg.scale(eps);
        let (cf, cg, cs) = (core_invariants(&jf), core_invariants(&jg), core_invariants(&js));
        let sx = natural_scale(&jf, -6, 4).max(natural_scale(&jg, -6, 4));
        let sz = natural_scale(&jf, -4, 3).max(natural_scale(&jg, -4, 3));
        let sh = natural_scale(&jf, -4, 2).max(natural_scale(&jg, -4, 2));
        let k = 1.0 + eps * eps;
        let hf = jf.hess.to_full();
        let hg = jg.hess.to_full();
        let mut pairing = 0.0;
        let mut fgrad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                pairing += hf[i][j] * hg[i][j];
                fgrad += hf[i][j] * jf.grad[i] * jg.grad[j];
            }
        }
        let lin = fgrad + cf.j * jg.hess.trace();
        rep.x_equal = max_nan(rep.x_equal, rel(cf.x, cg.x, sx));
        rep.x_sum = max_nan(rep.x_sum, rel(cs.x, k * k * cf.x, k * k * sx));
        rep.z_sum = max_nan(rep.z_sum, rel(cs.z, k * (cf.z + eps * cg.z), k * (1.0 + eps.abs()) * sz));
        rep.hessian_pairing = max_nan(rep.hessian_pairing, rel(pairing, jf.hess.trace() * jg.hess.trace(), sh));
        rep.z_linearised = max_nan(rep.z_linearised, rel(cg.z, lin, sz));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let mut f = |t: f64| Ok(t * t * t - 2.0 * t);
        let v = adaptive_simpson(&mut f, 1e-14).unwrap();
        assert!((v - (0.25 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn simpson_handles_oscillation() {
        let mut f = |t: f64| Ok((20.0 * t).sin());
        let v = adaptive_simpson(&mut f, 1e-12).unwrap();
        let exact = (1.0 - 20f64.cos()) / 20.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn segment_distance_to_axis() {
        assert!((segment_axis_distance(&[0.0, -1.0, 0.5], &[3.0, 1.0, 0.5]) - 0.5).abs() < 1e-15);
        assert!((segment_axis_distance(&[0.0, 1.0, 1.0], &[0.0, 2.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_loop_is_zero() {
        let e = parse("x1*x2*x3").unwrap();
        let p = [1.0, 1.0, 1.0];
        let r = loop_residual(&e, &[p], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.circulation, 0.0);
        assert_eq!(r.relative(), 0.0);
    }

    #[test]
    fn pole_rule_on_spheres() {
        let e = parse("log(sqrt(x1^2+x2^2+x3^2))").unwrap();
        let g = parse("acos(x1/sqrt(x1^2+x2^2+x3^2))").unwrap();
        let p = [0.3, 0.8, -0.5];
        let mut field = DirectionField::new(&e, [-1.0, 0.0, 0.0]);
        let w = field.omega(&p, &[0.0, 1.0, 0.0]).unwrap();
        let want = g.eval_jet(p).unwrap().grad;
        for i in 0..3 {
            assert!((w[i] - want[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn identical_functions_are_not_conjugate() {
        let f = parse("x1").unwrap();
        let rep = verify_pair(&f, &f, &[[0.1, 0.2, 0.3]]).unwrap();
        assert!(rep.norm_mismatch < 1e-15);
        assert!((rep.orthogonality - 1.0).abs() < 1e-15);
        assert!(!rep.passes());
    }

    #[test]
    fn relations_with_zero_epsilon() {
        let f = parse("x2*(x1^2+x2^2+x3^2)/(x2^2+x3^2)").unwrap();
        let g = parse("x3*(x1^2+x2^2+x3^2)/(x2^2+x3^2)").unwrap();
        let rep = conjugate_relations(&f, &g, &[[0.4, 0.9, -0.3]], 0.0).unwrap();
        assert_eq!(rep.x_sum, 0.0);
        assert!(rep.max() < 1e-12);
    }
}
