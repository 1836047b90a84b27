use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use psd_extract::extract::{self, DEFAULT_CHOL_TOL};
use psd_extract::{make_psd, subspaces, Method, SpectrumSpec};

fn extractors(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract");
    group.sample_size(20);
    for (n, k) in [(200, 40), (400, 80), (1000, 200)] {
        let a = make_psd(&SpectrumSpec::exponential(n, 1.0, 1e-20), 1).unwrap();
        let q = subspaces::epsilon_aligned_basis(&a, k, 0.01, 2).unwrap();
        for m in [Method::Rr, Method::SvdQv, Method::SvdU, Method::Nys] {
            group.bench_with_input(BenchmarkId::new(m.tag(), n), &(&a, &q), |b, &(a, q)| {
                b.iter(|| extract::extract(a, q, m, DEFAULT_CHOL_TOL).unwrap())
            });
        }
    }
    group.finish();
}

fn shifted(c: &mut Criterion) {
    let mut group = c.benchmark_group("shifted");
    group.sample_size(20);
    for (n, k) in [(200, 40), (400, 80)] {
        let a = make_psd(&SpectrumSpec::algebraic(n, 1.0, 1e-20), 1).unwrap();
        let q = subspaces::perturbed_trailing_basis(&a, k, 0.01, 2).unwrap();
        for m in [Method::Rr, Method::Nys] {
            group.bench_with_input(BenchmarkId::new(m.tag(), n), &(&a, &q), |b, &(a, q)| {
                b.iter(|| {
                    extract::shifted_trailing_extract(a, q, m, None, DEFAULT_CHOL_TOL).unwrap()
                })
            });
        }
        group.bench_with_input(BenchmarkId::new("power_estimate", n), &a, |b, a| {
            b.iter(|| extract::estimate_lambda_max_upper(a, extract::AUTO_SHIFT_ITERS, 3).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, extractors, shifted);
criterion_main!(benches);
