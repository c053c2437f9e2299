use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use povmlab::catalog::canonical_phase;
use povmlab::exec::Exec;
use povmlab::kernels::{continuity_modulus_with, gaussian_kernel};
use povmlab::povm::{check_commutative_with, dimension_scaling_with, smear, SpectralMeasure};
use povmlab::sampler::sample_categorical;
use povmlab::sets::{CircleSet, LineSet, MeasurableSet};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn modulus(c: &mut Criterion) {
    let kernel = gaussian_kernel(0.7).unwrap();
    let set: MeasurableSet = LineSet::from_intervals(&[(-1.0, 0.5), (1.0, 2.0)]).unwrap().into();
    let grid: Vec<f64> = (0..4001).map(|k| -5.0 + 0.0025 * k as f64).collect();
    let mut g = c.benchmark_group("continuity_modulus");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| {
            b.iter(|| continuity_modulus_with(&kernel, &set, black_box(&grid), 0.1, exec).unwrap())
        });
    }
    g.finish();
}

fn commutators(c: &mut Criterion) {
    let grid = SpectralMeasure::uniform_grid(-3.0, 3.0, 96).unwrap();
    let f = smear(&grid, &gaussian_kernel(0.5).unwrap()).unwrap();
    let family: Vec<MeasurableSet> = (0..24)
        .map(|k| LineSet::interval(-3.0 + 0.2 * k as f64, -2.0 + 0.2 * k as f64).unwrap().into())
        .collect();
    let mut g = c.benchmark_group("check_commutative");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| b.iter(|| check_commutative_with(&f, black_box(&family), 400, exec).unwrap()));
    }
    g.finish();
}

fn scaling(c: &mut Criterion) {
    let arc: MeasurableSet = CircleSet::arc(0.0, 0.1).unwrap().into();
    let dims = [32, 48, 64, 96, 128];
    let mut g = c.benchmark_group("dimension_scaling");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| {
            b.iter(|| dimension_scaling_with(black_box(&dims), canonical_phase, |f| f.norm(&arc), exec).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let p: Vec<f64> = (0..64).map(|k| 1.0 + (k % 7) as f64).collect();
    let mut g = c.benchmark_group("sample_categorical");
    for n in [100_000u64, 1_000_000] {
        for (name, exec) in STRATEGIES {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| sample_categorical(black_box(&p), n, 42, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, modulus, commutators, scaling, sampling);
criterion_main!(benches);
