use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rdfrl_bench::ring_mdp;
use rdfrl_core::domains::{Domain, DomainConfig, ToyDomain};
use rdfrl_core::objectives::{rdf_gradient, GradientBackend, LagrangianConfig, PreferenceGrid};
use rdfrl_core::planning::{soft_value_iteration, soft_vi_adjoint, softmax_row, value_iteration};

fn bench_vi(c: &mut Criterion) {
    let mut group = c.benchmark_group("value_iteration");
    for n in [225, 3721] {
        let mdp = ring_mdp(n, 3, 0.99);
        group.bench_with_input(BenchmarkId::new("hard", n), &mdp, |b, mdp| {
            b.iter(|| value_iteration(black_box(mdp), 1e-9, 20_000))
        });
        group.bench_with_input(BenchmarkId::new("soft", n), &mdp, |b, mdp| {
            b.iter(|| soft_value_iteration(black_box(mdp), 0.05, 1e-9, 20_000).unwrap())
        });
    }
    group.finish();
}

fn bench_adjoint(c: &mut Criterion) {
    let mdp = ring_mdp(3721, 3, 0.99);
    let q = soft_value_iteration(&mdp, 0.05, 1e-9, 20_000).unwrap();
    let mut g = vec![0.0; q.values.len()];
    g[3..6].copy_from_slice(&softmax_row(q.row(1), 0.05));
    c.bench_function("soft_vi_adjoint/3721", |b| {
        b.iter(|| soft_vi_adjoint(black_box(&mdp), &q, 0.05, &g, 1e-9, 20_000).unwrap())
    });
}

fn bench_toy_gradient(c: &mut Criterion) {
    let cfg = DomainConfig::Toy(ToyDomain::default());
    let domain = Domain::build(&cfg, cfg.default_planner()).unwrap();
    let lag = LagrangianConfig::new(0.0, 1.0).unwrap();
    let grid = PreferenceGrid::singleton(1.0);
    c.bench_function("toy_implicit_gradient", |b| {
        b.iter(|| rdf_gradient(&domain.pipeline, black_box(&[3.0]), &grid, &lag, GradientBackend::Implicit, 0.5).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_vi, bench_adjoint, bench_toy_gradient
}
criterion_main!(benches);
