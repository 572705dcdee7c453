use std::io::{Read, Write};
use std::process::ExitCode;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use conjugacy_core::conformal::{weight_test, ConformalError, ConformalMap};
use conjugacy_core::directions::{constraint_residuals, eta_from_omega, solve_directions, DirectionError};
use conjugacy_core::integrability::analyze;
use conjugacy_core::invariants::invariant_set;
use conjugacy_core::mobius::{self, canonicalize, default_samples, LorentzPair, MobiusError};
use conjugacy_core::reconstruct::{self, conjugate_relations, reconstruct_g, PathGrid, ReconstructError};
use conjugacy_core::sampling::rng;
use conjugacy_core::selftest::{self, SelftestConfig};
use conjugacy_core::tensor::Vec3;
use conjugacy_core::{Expr, Invariant, Jet3};

use crate::input::{self, parse_point, Grid, Source};
use crate::output::{num, opt_vec3, to_json, vec3, write_records, Format, Record};
use crate::{CliError, FnArgs, PointArgs};

fn record(v: Value) -> Record {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("records are objects"),
    }
}

fn setup(src: &FnArgs, pts: &PointArgs) -> Result<(Source, Vec<Vec3>), CliError> {
    let s = input::source(src.f.as_deref(), src.gallery.as_deref())?;
    let points = input::points(pts.point.as_deref(), &pts.grid, &s, pts.samples, pts.seed)?;
    Ok((s, points))
}

fn jet_at(f: &Expr, p: &Vec3) -> Result<Jet3, CliError> {
    f.eval_jet(*p).map_err(|e| CliError::Domain(format!("at {p:?}: {e}")))
}

/// Evaluates `each` on every point in parallel; output keeps point order.
fn sweep<F>(points: &[Vec3], each: F) -> Result<Vec<Record>, CliError>
where
    F: Fn(&Vec3) -> Result<Record, CliError> + Sync + Send,
{
    points.par_iter().map(each).collect()
}

pub fn invariants<W: Write>(out: &mut W, src: &FnArgs, pts: &PointArgs, fmt: Format) -> Result<ExitCode, CliError> {
    let (s, points) = setup(src, pts)?;
    let records = sweep(&points, |p| {
        let set = invariant_set(&jet_at(&s.f, p)?);
        let mut r = Record::new();
        r.insert("point".into(), vec3(p));
        for inv in Invariant::ALL {
            r.insert(inv.name().into(), num(set.get(inv)));
        }
        Ok(r)
    })?;
    write_records(out, fmt, &records)?;
    Ok(ExitCode::SUCCESS)
}

pub fn classify<W: Write>(out: &mut W, src: &FnArgs, pts: &PointArgs, fmt: Format) -> Result<ExitCode, CliError> {
    let (s, points) = setup(src, pts)?;
    let records = sweep(&points, |p| {
        let jet = jet_at(&s.f, p)?;
        Ok(match analyze(&jet) {
            Ok(pr) => {
                let (sol, rep) = (&pr.solution, &pr.report);
                record(json!({
                    "point": vec3(p),
                    "class": sol.class.name(),
                    "verdict": rep.verdict.name(),
                    "x_rel": num(sol.x_rel),
                    "y_rel": num(sol.y_rel),
                    "omegas": sol.omegas.iter().map(vec3).collect::<Vec<_>>(),
                    "omega": opt_vec3(rep.chosen_omega.as_ref().or(rep.omega.as_ref())),
                    "eta": opt_vec3(rep.eta.as_ref()),
                    "residuals": {
                        "p_plus": num(rep.p_plus),
                        "p_minus": num(rep.p_minus),
                        "q_plus": num(rep.q_plus),
                        "q_minus": num(rep.q_minus),
                        "v": num(rep.v_residual),
                        "fifth": num(rep.fifth_residual),
                        "bis4": num(rep.bis4_residual),
                        "bis5": num(rep.bis5_residual),
                    },
                    "note": Value::Null,
                }))
            }
            Err(e) => {
                let sol = solve_directions(&jet).ok();
                record(json!({
                    "point": vec3(p),
                    "class": sol.as_ref().map_or("Undetermined", |s| s.class.name()),
                    "verdict": "Inconclusive",
                    "x_rel": num(sol.as_ref().map_or(f64::NAN, |s| s.x_rel)),
                    "y_rel": num(sol.as_ref().map_or(f64::NAN, |s| s.y_rel)),
                    "omegas": sol.as_ref().map_or(vec![], |s| s.omegas.iter().map(vec3).collect()),
                    "omega": Value::Null,
                    "eta": Value::Null,
                    "residuals": Value::Null,
                    "note": e.to_string(),
                }))
            }
        })
    })?;
    write_records(out, fmt, &records)?;
    Ok(ExitCode::SUCCESS)
}

pub fn directions<W: Write>(out: &mut W, src: &FnArgs, pts: &PointArgs, fmt: Format) -> Result<ExitCode, CliError> {
    let (s, points) = setup(src, pts)?;
    let records = sweep(&points, |p| {
        let jet = jet_at(&s.f, p)?;
        Ok(match solve_directions(&jet) {
            Ok(sol) => {
                let etas: Vec<Value> =
                    sol.omegas.iter().map(|w| eta_from_omega(&jet, w, 1.0).ok().map_or(Value::Null, |e| vec3(&e))).collect();
                let constraint = sol
                    .omegas
                    .iter()
                    .flat_map(|w| constraint_residuals(&jet, w))
                    .fold(0.0, f64::max);
                record(json!({
                    "point": vec3(p),
                    "class": sol.class.name(),
                    "x": num(sol.x),
                    "y": num(sol.y),
                    "x_rel": num(sol.x_rel),
                    "y_rel": num(sol.y_rel),
                    "omegas": sol.omegas.iter().map(vec3).collect::<Vec<_>>(),
                    "etas": etas,
                    "constraint_residual": num(constraint),
                }))
            }
            Err(DirectionError::CriticalPoint { .. }) => record(json!({
                "point": vec3(p),
                "class": "CriticalPoint",
                "x": Value::Null,
                "y": Value::Null,
                "x_rel": Value::Null,
                "y_rel": Value::Null,
                "omegas": [],
                "etas": [],
                "constraint_residual": Value::Null,
            })),
            Err(e) => return Err(CliError::Domain(format!("at {p:?}: {e}"))),
        })
    })?;
    write_records(out, fmt, &records)?;
    Ok(ExitCode::SUCCESS)
}

fn reconstruct_error(e: ReconstructError) -> CliError {
    match e {
        ReconstructError::NonIntegrable { .. } | ReconstructError::NoDirection { .. } => {
            CliError::NonIntegrable(e.to_string())
        }
        _ => CliError::Domain(e.to_string()),
    }
}

/// The spacing shared by all axes with more than one step.
fn uniform_spacing(grid: &Grid) -> Result<f64, CliError> {
    let hs: Vec<f64> = grid.axes.iter().filter(|a| a.steps > 1).map(|a| a.spacing()).collect();
    let Some(&h) = hs.first() else { return Ok(1.0) };
    if h <= 0.0 || hs.iter().any(|&x| (x - h).abs() > 1e-9 * h) {
        return Err(CliError::Usage(format!(
            "reconstruct needs increasing axes with one common spacing, got {hs:?}"
        )));
    }
    Ok(h)
}

pub fn reconstruct<W: Write>(
    out: &mut W,
    src: &FnArgs,
    grid: &[String],
    reference: Option<&str>,
    pole: Option<&str>,
    tol: f64,
    fmt: Format,
) -> Result<ExitCode, CliError> {
    let s = input::source(src.f.as_deref(), src.gallery.as_deref())?;
    let reference = reference.map(|r| input::expression("--reference", r)).transpose()?;
    let g = Grid::parse(grid)?;
    let h = uniform_spacing(&g)?;
    let base = [g.axes[0].min, g.axes[1].min, g.axes[2].min];
    let seed = match &reference {
        Some(r) => jet_at(r, &base)?.grad,
        None => {
            let jet = jet_at(&s.f, &base)?;
            match analyze(&jet) {
                Ok(pr) => pr
                    .report
                    .chosen_omega
                    .or(pr.report.omega)
                    .or(pr.solution.omegas.first().copied())
                    .unwrap_or([1.0, 0.0, 0.0]),
                Err(_) => [1.0, 0.0, 0.0],
            }
        }
    };
    let mut pg = PathGrid::new(base, h, g.counts(), seed);
    if let Some(p) = pole {
        pg = pg.with_pole(parse_point(p)?);
    }
    let field = reconstruct_g(&s.f, &pg).map_err(reconstruct_error)?;
    let r0 = match &reference {
        Some(r) => Some(r.eval(base).map_err(|e| CliError::Domain(format!("reference at {base:?}: {e}")))?),
        None => None,
    };
    let mut worst: f64 = 0.0;
    let mut samples = Vec::with_capacity(field.values.len());
    for (p, &v) in field.points.iter().zip(&field.values) {
        let mut r = record(json!({ "point": vec3(p), "g": num(v) }));
        if let (Some(re), Some(r0)) = (&reference, r0) {
            let want = re.eval(*p).map_err(|e| CliError::Domain(format!("reference at {p:?}: {e}")))? - r0;
            worst = worst.max((want - v).abs());
            r.insert("reference".into(), num(want));
            r.insert("error".into(), num(v - want));
        }
        samples.push(r);
    }
    let mut summary = record(json!({
        "loop_max": num(field.loop_max),
        "loops_checked": field.loops_checked,
        "base": vec3(&base),
        "h": num(h),
        "counts": g.counts(),
    }));
    if reference.is_some() {
        summary.insert("max_error".into(), num(worst));
        summary.insert("matches_reference".into(), Value::Bool(worst <= tol));
    }
    match fmt {
        Format::Json => {
            summary.insert("samples".into(), Value::Array(samples.into_iter().map(Value::Object).collect()));
            writeln!(out, "{}", to_json(&Value::Object(summary)))?;
        }
        Format::Csv => {
            write_records(out, fmt, &samples)?;
            eprintln!("{}", to_json(&Value::Object(summary)));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn partner(s: &Source, g: Option<&str>) -> Result<Expr, CliError> {
    match (g, s.gallery.as_ref().and_then(|e| e.g.clone())) {
        (Some(src), _) => input::expression("--g", src),
        (None, Some(g)) => Ok(g),
        (None, None) => Err(CliError::Usage("--g is required (the gallery entry lists no conjugate)".into())),
    }
}

pub fn verify_pair<W: Write>(
    out: &mut W,
    src: &FnArgs,
    g: Option<&str>,
    pts: &PointArgs,
    tol: f64,
    fmt: Format,
) -> Result<ExitCode, CliError> {
    let (s, points) = setup(src, pts)?;
    let g = partner(&s, g)?;
    let rep = reconstruct::verify_pair(&s.f, &g, &points).map_err(|e| CliError::Domain(e.to_string()))?;
    let r = record(json!({
        "samples": rep.samples,
        "norm_mismatch": num(rep.norm_mismatch),
        "orthogonality": num(rep.orthogonality),
        "tolerance": num(tol),
        "passes": rep.norm_mismatch < tol && rep.orthogonality < tol,
    }));
    write_records(out, fmt, &[r])?;
    Ok(ExitCode::SUCCESS)
}

pub fn relations<W: Write>(
    out: &mut W,
    src: &FnArgs,
    g: Option<&str>,
    pts: &PointArgs,
    eps: &[f64],
    fmt: Format,
) -> Result<ExitCode, CliError> {
    let (s, points) = setup(src, pts)?;
    let g = partner(&s, g)?;
    let records = eps
        .par_iter()
        .map(|&e| {
            let rep = conjugate_relations(&s.f, &g, &points, e).map_err(|e| CliError::Domain(e.to_string()))?;
            let mut r = record(json!({ "eps": num(e), "max": num(rep.max()), "samples": points.len() }));
            for (k, v) in rep.named() {
                r.insert(k.into(), num(v));
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_records(out, fmt, &records)?;
    Ok(ExitCode::SUCCESS)
}

fn matrix_from(v: &Value, key: &str) -> Result<DMatrix<f64>, CliError> {
    let bad = |m: &str| CliError::BadMatrix(format!("\"{key}\": {m}"));
    let rows = v.get(key).and_then(Value::as_array).ok_or_else(|| bad("missing or not an array of rows"))?;
    let n = rows.len();
    let mut data = Vec::with_capacity(n * n);
    for row in rows {
        let row = row.as_array().ok_or_else(|| bad("row is not an array"))?;
        if row.len() != n {
            return Err(bad("matrix is not square"));
        }
        for x in row {
            data.push(x.as_f64().ok_or_else(|| bad("entry is not a number"))?);
        }
    }
    Ok(DMatrix::from_row_slice(n, n, &data))
}

fn mobius_error(e: MobiusError) -> CliError {
    match e {
        MobiusError::Eval(e) => CliError::Domain(e.to_string()),
        other => CliError::BadMatrix(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect())).collect())
}

pub fn canon<W: Write>(out: &mut W, path: &str, fmt: Format) -> Result<ExitCode, CliError> {
    let mut text = String::new();
    if path == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| CliError::BadMatrix(format!("{path}: {e}")))?;
    }
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::BadMatrix(format!("{path}: {e}")))?;
    let pair = LorentzPair::new(matrix_from(&v, "h")?, matrix_from(&v, "n")?).map_err(mobius_error)?;
    let c = canonicalize(&pair).map_err(mobius_error)?;
    let r = record(json!({
        "dim": pair.dim(),
        "case": c.case.name(),
        "params": c.case.params().into_iter().map(num).collect::<Vec<_>>(),
        "a": rows(&c.a),
        "h_residual": num(c.h_residual),
        "n_residual": num(c.n_residual),
    }));
    write_records(out, fmt, &[r])?;
    Ok(ExitCode::SUCCESS)
}

pub fn classify_xyzero<W: Write>(
    out: &mut W,
    src: &FnArgs,
    point: Option<&str>,
    radius: f64,
    seed: u64,
    fmt: Format,
) -> Result<ExitCode, CliError> {
    let s = input::source(src.f.as_deref(), src.gallery.as_deref())?;
    let center = match (point, &s.gallery) {
        (Some(p), _) => parse_point(p)?,
        (None, Some(e)) => e.domain.sample(&mut rng(seed)),
        (None, None) => return Err(CliError::Usage("--point is required with --f".into())),
    };
    let mut r = record(json!({ "point": vec3(&center), "radius": num(radius) }));
    match mobius::classify_xyzero(&s.f, &default_samples(&center, radius)) {
        Ok(rep) => {
            r.insert("model".into(), rep.model.name().into());
            r.insert("reason".into(), rep.reason.map_or(Value::Null, Value::String));
            r.insert("fit_residual".into(), num(rep.fit_residual));
            r.insert("closedness".into(), num(rep.closedness));
            r.insert("xy_max".into(), num(rep.xy_max));
            r.insert("killing".into(), rep.field.params().iter().map(|&x| num(x)).collect());
            let c = rep.canonical.as_ref();
            r.insert("case".into(), c.map_or(Value::Null, |c| c.case.name().into()));
            r.insert("params".into(), c.map_or(Value::Null, |c| c.case.params().into_iter().map(num).collect()));
        }
        Err(MobiusError::Eval(e)) => return Err(CliError::Domain(e.to_string())),
        Err(e) => {
            r.insert("model".into(), "NotClassifiable".into());
            r.insert("reason".into(), e.to_string().into());
        }
    }
    write_records(out, fmt, &[r])?;
    Ok(ExitCode::SUCCESS)
}

/// Maps are drawn away from the point's pole so the pulled-back jets stay
/// well conditioned.
const POLE_MARGIN: f64 = 0.3;

pub fn weights<W: Write>(
    out: &mut W,
    src: &FnArgs,
    pts: &PointArgs,
    maps: usize,
    tol: f64,
    fmt: Format,
) -> Result<ExitCode, CliError> {
    let (s, points) = setup(src, pts)?;
    for p in &points {
        jet_at(&s.f, p)?;
    }
    let mut r = rng(pts.seed);
    let mut cases: Vec<(Vec3, ConformalMap)> = Vec::with_capacity(points.len() * maps);
    for p in &points {
        let mut drawn = 0;
        for _ in 0..100 * maps.max(1) {
            if drawn == maps {
                break;
            }
            let m = ConformalMap::random(&mut r);
            if m.pole_distance(p) >= POLE_MARGIN {
                cases.push((*p, m));
                drawn += 1;
            }
        }
    }
    // per case: residual of each invariant, or None when the image leaves the domain
    let results: Vec<Option<Vec<f64>>> = cases
        .par_iter()
        .map(|(p, m)| {
            Invariant::ALL
                .iter()
                .map(|&inv| match weight_test(&s.f, m, p, inv) {
                    Ok(v) => Ok(v),
                    Err(ConformalError::Eval(_)) | Err(ConformalError::Pole(_)) => Err(()),
                })
                .collect::<Result<Vec<f64>, ()>>()
                .ok()
        })
        .collect();
    let used: Vec<&Vec<f64>> = results.iter().flatten().collect();
    if used.is_empty() {
        return Err(CliError::Domain("no conformal image of the sample points lies in the domain".into()));
    }
    let records: Vec<Record> = Invariant::ALL
        .iter()
        .enumerate()
        .map(|(i, inv)| {
            let worst = used.iter().map(|v| v[i]).fold(0.0, f64::max);
            record(json!({
                "invariant": inv.name(),
                "weight": inv.weight(),
                "degree": inv.degree(),
                "odd": inv.is_odd(),
                "max_residual": num(worst),
                "samples": used.len(),
                "skipped": cases.len() - used.len(),
                "tolerance": num(tol),
                "passes": worst <= tol,
            }))
        })
        .collect();
    write_records(out, fmt, &records)?;
    Ok(ExitCode::SUCCESS)
}

pub fn selftest<W: Write>(
    out: &mut W,
    seed: u64,
    suites: Vec<String>,
    corrupt: bool,
    samples: usize,
    fmt: Format,
) -> Result<ExitCode, CliError> {
    let cfg = SelftestConfig {
        seed,
        suites: (!suites.is_empty()).then_some(suites),
        corrupt,
        samples,
    };
    let results = selftest::run(&cfg).map_err(CliError::Usage)?;
    let mut records = Vec::new();
    for s in &results {
        for c in &s.checks {
            records.push(record(json!({
                "suite": s.name,
                "check": c.name,
                "max_residual": num(c.max_residual),
                "tolerance": num(c.tolerance),
                "samples": c.samples,
                "passed": c.passed(),
            })));
        }
    }
    write_records(out, fmt, &records)?;
    let total = records.len();
    let passed = results.iter().flat_map(|s| &s.checks).filter(|c| c.passed()).count();
    for s in &results {
        eprintln!("{:<12} {}", s.name, if s.passed() { "pass" } else { "FAIL" });
    }
    eprintln!("{passed} of {total} checks passed");
    Ok(if selftest::all_passed(&results) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
