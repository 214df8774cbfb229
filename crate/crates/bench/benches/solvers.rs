use std::hint::black_box;

use ampcs_bench::instance;
use ampcs_core::solvers::{amp_solve, Algorithm, Lambda, SolverConfig};
use ampcs_core::{Case, EnsembleKind};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const ITERATIONS: usize = 10;

fn amp_iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("amp_10_iterations");
    group.sample_size(20);
    let cfg = SolverConfig::new(Algorithm::Amp, Case::Signed, Lambda::Optimal, ITERATIONS);
    for dim in [1024, 4096] {
        for kind in [EnsembleKind::GaussianIid, EnsembleKind::PartialFourier] {
            let inst = instance(kind, dim);
            group.throughput(Throughput::Elements(dim as u64));
            group.bench_with_input(BenchmarkId::new(kind.name(), dim), &inst, |b, inst| {
                b.iter(|| amp_solve(black_box(inst), &cfg).unwrap())
            });
        }
    }
    // Fourier only: dense storage at this size is 2 GB.
    let inst = instance(EnsembleKind::PartialFourier, 1 << 16);
    group.bench_function(BenchmarkId::new("fourier", 1 << 16), |b| {
        b.iter(|| amp_solve(black_box(&inst), &cfg).unwrap())
    });
    group.finish();
}

fn operator_products(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    for kind in [EnsembleKind::GaussianIid, EnsembleKind::PartialFourier] {
        let inst = instance(kind, 4096);
        let mut y = vec![0.0; inst.n];
        let mut x = vec![0.0; inst.dim];
        group.bench_function(BenchmarkId::new("apply", kind.name()), |b| {
            b.iter(|| inst.operator.apply_into(black_box(&inst.x0), &mut y))
        });
        group.bench_function(BenchmarkId::new("adjoint", kind.name()), |b| {
            b.iter(|| inst.operator.adjoint_into(black_box(&inst.y), &mut x))
        });
    }
    group.finish();
}

criterion_group!(benches, amp_iterations, operator_products);
criterion_main!(benches);
