//! Shared fixtures for the benchmarks.

use conjugacy_core::gallery::entry;
use conjugacy_core::sampling::{random_jet, rng};
use conjugacy_core::tensor::Vec3;
use conjugacy_core::{Expr, Jet3};

/// Random jets with entries of size about one.
pub fn jets(n: usize, seed: u64) -> Vec<Jet3> {
    let mut r = rng(seed);
    (0..n).map(|_| random_jet(&mut r, 1.0)).collect()
}

/// A gallery function with points from its domain.
pub fn gallery_points(name: &str, n: usize, seed: u64) -> (Expr, Vec<Vec3>) {
    let e = entry(name).unwrap_or_else(|| panic!("no gallery entry {name}"));
    let pts = e.domain.samples(&mut rng(seed), n);
    (e.f, pts)
}
