use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use conjugacy_bench::{gallery_points, jets};
use conjugacy_core::directions::solve_directions;
use conjugacy_core::gallery::entry;
use conjugacy_core::integrability::analyze;
use conjugacy_core::invariants::invariant_set;
use conjugacy_core::mobius::{canonicalize, conjugated_pair, random_invertible, CanonicalCase};
use conjugacy_core::reconstruct::{reconstruct_g, PathGrid};
use conjugacy_core::sampling::rng;

fn bench_jets(c: &mut Criterion) {
    let mut g = c.benchmark_group("jets");
    for name in ["hopf", "cylindrical", "x1x2x3"] {
        let (f, pts) = gallery_points(name, 64, 1);
        g.bench_function(name, |b| {
            b.iter(|| {
                for p in &pts {
                    black_box(f.eval_jet(*p).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn bench_invariants(c: &mut Criterion) {
    let js = jets(64, 2);
    c.bench_function("invariants/full_set", |b| {
        b.iter(|| {
            for j in &js {
                black_box(invariant_set(j));
            }
        })
    });
}

fn bench_directions(c: &mut Criterion) {
    let js = jets(64, 3);
    let mut g = c.benchmark_group("directions");
    g.bench_function("solve", |b| {
        b.iter(|| {
            for j in &js {
                let _ = black_box(solve_directions(j));
            }
        })
    });
    g.bench_function("analyze", |b| {
        b.iter(|| {
            for j in &js {
                let _ = black_box(analyze(j));
            }
        })
    });
    g.finish();
}

fn bench_canonicalize(c: &mut Criterion) {
    let mut r = rng(4);
    let mut g = c.benchmark_group("canonicalize");
    for case in [
        CanonicalCase::RealPair { lambda: 1.2 },
        CanonicalCase::Nilpotent,
        CanonicalCase::FirstType { lambda: 0.7, mu: 1.9 },
        CanonicalCase::ThirdType { mu: 0.8 },
    ] {
        let a = random_invertible(&mut r, case.dim(), 10.0);
        let pair = conjugated_pair(&case, &a).unwrap();
        g.bench_function(case.name(), |b| b.iter(|| black_box(canonicalize(&pair).unwrap())));
    }
    g.finish();
}

fn bench_reconstruct(c: &mut Criterion) {
    let e = entry("cylindrical").unwrap();
    let g = e.g.unwrap();
    let base = [-0.2, 0.3, 0.4];
    let grid = PathGrid::new(base, 0.05, [8, 8, 8], g.eval_jet(base).unwrap().grad);
    let mut group = c.benchmark_group("reconstruct");
    group.sample_size(10);
    group.bench_function("cylindrical_8x8x8", |b| b.iter(|| black_box(reconstruct_g(&e.f, &grid).unwrap())));
    group.finish();
}

criterion_group!(benches, bench_jets, bench_invariants, bench_directions, bench_canonicalize, bench_reconstruct);
criterion_main!(benches);
