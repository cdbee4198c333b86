use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kinlayer::geometry::DomainSpec;
use kinlayer::milne::{MilneConfig, MilneOperator};
use kinlayer::transport::{self, TransportConfig};
use kinlayer::Exec;

fn transport_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("transport_solve");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let mut cfg =
            TransportConfig::new(0.1, DomainSpec::circle(1.0).unwrap()).with_grid(16, 32, 32);
        cfg.exec = exec;
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &cfg,
            |b, cfg| b.iter(|| transport::solve(cfg).unwrap()),
        );
    }
    group.finish();
}

fn milne_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("milne_solve");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let mut cfg = MilneConfig::new(0.1, 1.0);
        cfg.exec = exec;
        let op = MilneOperator::new(&cfg).unwrap();
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| op.solve_inflow(&|p: f64| p.sin() * p.cos(), None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, transport_solve, milne_solve);
criterion_main!(benches);
