use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use senselab::certify::build_global_certificate;
use senselab::objective::{Objective, EIG_TOL};
use senselab::rng::{gaussian_matrix, stream_rng};
use senselab_bench::{fixture, CASES};

fn label(n: usize, m: usize, r: usize) -> String {
    format!("n{n}_m{m}_r{r}")
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient");
    for (n, m, r, rs) in CASES {
        let (inst, x) = fixture(n, m, r, rs, 1);
        let obj = Objective::new(&inst);
        group.bench_with_input(BenchmarkId::from_parameter(label(n, m, r)), &x, |b, x| {
            b.iter(|| obj.loss_and_gradient(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn hessian_vector(c: &mut Criterion) {
    let mut group = c.benchmark_group("hvp");
    for (n, m, r, rs) in CASES {
        let (inst, x) = fixture(n, m, r, rs, 2);
        let obj = Objective::new(&inst);
        let (_, s) = obj.loss_and_curvature(&x).unwrap();
        let u = gaussian_matrix(&mut stream_rng(2, 3), n, r);
        group.bench_function(label(n, m, r), |b| b.iter(|| obj.hvp_with(&x, &s, black_box(&u)).unwrap()));
    }
    group.finish();
}

fn min_eigenvalue(c: &mut Criterion) {
    let mut group = c.benchmark_group("min_hessian_eig");
    group.sample_size(20);
    for (n, m, r, rs) in CASES {
        let (inst, x) = fixture(n, m, r, rs, 3);
        let obj = Objective::new(&inst);
        group.bench_function(label(n, m, r), |b| b.iter(|| obj.min_hessian_eig(black_box(&x), EIG_TOL).unwrap()));
    }
    group.finish();
}

fn certificate(c: &mut Criterion) {
    let mut group = c.benchmark_group("global_certificate");
    group.sample_size(10);
    for (n, r, rs) in [(6, 3, 2), (10, 4, 2)] {
        let (inst, x) = fixture(n, 4 * n * n, r, rs, 4);
        let eps = inst.realized_eps();
        group.bench_function(label(n, 4 * n * n, r), |b| {
            b.iter(|| build_global_certificate(black_box(&x), inst.truth(), eps, 1e-6, 0.3, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gradient, hessian_vector, min_eigenvalue, certificate);
criterion_main!(benches);
