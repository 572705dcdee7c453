//! Function sources and point sets.

use conjugacy_core::gallery::{entry, list_entries, GalleryEntry};
use conjugacy_core::sampling::rng;
use conjugacy_core::tensor::Vec3;
use conjugacy_core::{parse, Expr};

use crate::CliError;

/// Upper bound on the number of grid points.
pub const MAX_POINTS: u64 = 10_000_000;

pub struct Source {
    pub f: Expr,
    pub gallery: Option<GalleryEntry>,
}

pub fn expression(label: &str, src: &str) -> Result<Expr, CliError> {
    parse(src).map_err(|e| CliError::Parse(format!("{label}: {e}")))
}

pub fn source(f: Option<&str>, gallery: Option<&str>) -> Result<Source, CliError> {
    match (f, gallery) {
        (Some(src), None) => Ok(Source { f: expression("--f", src)?, gallery: None }),
        (None, Some(name)) => {
            let e = entry(name).ok_or_else(|| {
                let names: Vec<&str> = list_entries().iter().map(|e| e.name).collect();
                CliError::Usage(format!("unknown gallery entry {name:?}; known: {}", names.join(", ")))
            })?;
            Ok(Source { f: e.f.clone(), gallery: Some(e) })
        }
        (Some(_), Some(_)) => Err(CliError::Usage("give either --f or --gallery, not both".into())),
        (None, None) => Err(CliError::Usage("one of --f or --gallery is required".into())),
    }
}

pub fn parse_point(s: &str) -> Result<Vec3, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("point {s:?} needs three comma-separated coordinates")));
    }
    let mut p = [0.0; 3];
    for (c, part) in p.iter_mut().zip(&parts) {
        *c = part
            .parse()
            .map_err(|_| CliError::Usage(format!("bad coordinate {part:?} in point {s:?}")))?;
    }
    Ok(p)
}

/// A single step samples `min` only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Axis, CliError> {
        let bad = || CliError::Usage(format!("grid axis {s:?} should read min:max:steps"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [lo, hi, n] = parts[..] else { return Err(bad()) };
        let axis = Axis {
            min: lo.parse().map_err(|_| bad())?,
            max: hi.parse().map_err(|_| bad())?,
            steps: n.parse().map_err(|_| bad())?,
        };
        if axis.steps == 0 || !axis.min.is_finite() || !axis.max.is_finite() {
            return Err(bad());
        }
        Ok(axis)
    }

    pub fn spacing(&self) -> f64 {
        if self.steps > 1 {
            (self.max - self.min) / (self.steps - 1) as f64
        } else {
            0.0
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        if i + 1 == self.steps && self.steps > 1 {
            self.max
        } else {
            self.min + self.spacing() * i as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub axes: [Axis; 3],
}

impl Grid {
    pub fn parse(specs: &[String]) -> Result<Grid, CliError> {
        let axes: Vec<Axis> = match specs.len() {
            1 => {
                let a = Axis::parse(&specs[0])?;
                vec![a; 3]
            }
            3 => specs.iter().map(|s| Axis::parse(s)).collect::<Result<_, _>>()?,
            n => return Err(CliError::Usage(format!("--grid takes one or three axis specs, got {n}"))),
        };
        let total: u64 = axes.iter().map(|a| a.steps as u64).product();
        if total > MAX_POINTS {
            return Err(CliError::Usage(format!("grid has {total} points; the limit is {MAX_POINTS}")));
        }
        Ok(Grid { axes: [axes[0], axes[1], axes[2]] })
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.axes[0].steps, self.axes[1].steps, self.axes[2].steps]
    }

    /// Points with x₁ varying fastest.
    pub fn points(&self) -> Vec<Vec3> {
        let [n1, n2, n3] = self.counts();
        let mut out = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    out.push([self.axes[0].at(i), self.axes[1].at(j), self.axes[2].at(k)]);
                }
            }
        }
        out
    }
}

/// The points to evaluate: an explicit point, a grid, or random samples from
/// the gallery entry's domain.
pub fn points(
    point: Option<&str>,
    grid: &[String],
    src: &Source,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec3>, CliError> {
    match (point, grid.is_empty()) {
        (Some(_), false) => Err(CliError::Usage("give either --point or --grid, not both".into())),
        (Some(p), true) => Ok(vec![parse_point(p)?]),
        (None, false) => Ok(Grid::parse(grid)?.points()),
        (None, true) => match &src.gallery {
            Some(e) => Ok(e.domain.samples(&mut rng(seed), samples)),
            None => Err(CliError::Usage("--point or --grid is required with --f".into())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_hit_both_ends() {
        let a = Axis::parse("-1:1:5").unwrap();
        assert_eq!(a.at(0), -1.0);
        assert_eq!(a.at(4), 1.0);
        assert_eq!(a.at(2), 0.0);
        assert!(Axis::parse("0:1").is_err());
        assert!(Axis::parse("0:1:0").is_err());
        assert!(Axis::parse("a:1:3").is_err());
    }

    #[test]
    fn one_spec_covers_all_axes() {
        let g = Grid::parse(&["0:1:2".to_string()]).unwrap();
        assert_eq!(g.counts(), [2, 2, 2]);
        assert_eq!(g.points()[1], [1.0, 0.0, 0.0]);
        assert!(Grid::parse(&["0:1:2".into(), "0:1:2".into()]).is_err());
    }

    #[test]
    fn points_parse() {
        assert_eq!(parse_point(" 1, -2.5,3e-1").unwrap(), [1.0, -2.5, 0.3]);
        assert!(parse_point("1,2").is_err());
        assert!(parse_point("1,2,x").is_err());
    }
}
