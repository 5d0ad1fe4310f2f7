use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfqkd::keyrate::{sweep, ProtocolConfig, Transmitter};
use mfqkd::par::Execution;
use mfqkd::passive::{PassiveParams, PassiveStateSet, QuadratureOptions, RegionGeometry};
use std::hint::black_box;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn state_quadrature(c: &mut Criterion) {
    let params = PassiveParams::from_attenuation(0.5, 90.0, RegionGeometry::default(), 4);
    let mut group = c.benchmark_group("passive_states");
    group.sample_size(10);
    for (name, execution) in POLICIES {
        let opts = QuadratureOptions { nodes: 8, convergence_check: false, execution, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| PassiveStateSet::compute(black_box(&params), opts).unwrap())
        });
    }
    group.finish();
}

fn oil_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("oil_sweep");
    group.sample_size(10);
    for (name, execution) in POLICIES {
        let mut cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
        cfg.distances_km = (0..8).map(|k| 20.0 * k as f64).collect();
        cfg.attenuations_db = vec![30.0, 90.0, 120.0];
        cfg.quadrature.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| b.iter(|| sweep(black_box(cfg)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, state_quadrature, oil_sweep);
criterion_main!(benches);
