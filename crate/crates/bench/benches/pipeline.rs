//! Benchmarks for the hot paths: gradient evaluation, Hessian assembly,
//! the eigensolver, and permutation matching.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use relu_recover::evaluation::best_permutation_match;
use relu_recover::numerics::{
    standard_gaussian_matrix, symmetric_eigenvalues, thin_svd,
};
use relu_recover::objective::{empirical_gradient, empirical_hessian};
use relu_recover::teacher::{generate_dataset, make_ground_truth};
use relu_recover::RngStream;

fn bench_empirical_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_gradient");
    for &(d, n) in &[(10usize, 5_000usize), (50, 2_500), (100, 5_000)] {
        let mut rng = RngStream::new(1);
        let spec = make_ground_truth(d, 5, 1.0, 2.0, &mut rng).unwrap();
        let ds = generate_dataset(&spec, n, &mut rng.derive(&[0])).unwrap();
        let w = spec
            .w_star
            .add(&standard_gaussian_matrix(d, 5, &mut rng).unwrap().scale(0.1))
            .unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("d{d}_N{n}")),
            &(),
            |b, _| b.iter(|| empirical_gradient(&w, &ds).unwrap()),
        );
    }
    group.finish();
}

fn bench_empirical_hessian(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_hessian");
    group.sample_size(10);
    for &(d, n) in &[(10usize, 10_000usize), (20, 10_000)] {
        let mut rng = RngStream::new(2);
        let spec = make_ground_truth(d, 5, 1.0, 2.0, &mut rng).unwrap();
        let inputs = standard_gaussian_matrix(n, d, &mut rng).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("d{d}_N{n}")),
            &(),
            |b, _| b.iter(|| empirical_hessian(&spec.w_star, &inputs).unwrap()),
        );
    }
    group.finish();
}

fn bench_eigensolver(c: &mut Criterion) {
    let mut group = c.benchmark_group("symmetric_eigenvalues");
    for &n in &[50usize, 100] {
        let mut rng = RngStream::new(3);
        let a = standard_gaussian_matrix(n, n, &mut rng).unwrap();
        let s = a.matmul(&a.transpose()).unwrap().scale(1.0 / n as f64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &(), |b, _| {
            b.iter(|| symmetric_eigenvalues(&s).unwrap())
        });
    }
    group.finish();
}

fn bench_thin_svd(c: &mut Criterion) {
    let mut rng = RngStream::new(4);
    let a = standard_gaussian_matrix(100, 5, &mut rng).unwrap();
    c.bench_function("thin_svd_100x5", |b| b.iter(|| thin_svd(&a).unwrap()));
}

fn bench_permutation_match(c: &mut Criterion) {
    let mut group = c.benchmark_group("best_permutation_match");
    for &k in &[5usize, 8, 16] {
        let mut rng = RngStream::new(5);
        let w_star = standard_gaussian_matrix(k + 2, k, &mut rng).unwrap();
        let w = w_star
            .add(&standard_gaussian_matrix(k + 2, k, &mut rng).unwrap().scale(0.3))
            .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &(), |b, _| {
            b.iter(|| best_permutation_match(&w, &w_star).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_empirical_gradient,
    bench_empirical_hessian,
    bench_eigensolver,
    bench_thin_svd,
    bench_permutation_match
);
criterion_main!(benches);
