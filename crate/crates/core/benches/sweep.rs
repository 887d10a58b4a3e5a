use criterion::{criterion_group, criterion_main, Criterion};

use sagmec::bcd::Variant;
use sagmec::harness::{sweep, SweepParam, SweepSpec};
use sagmec::par::Exec;
use sagmec::scenario::SimConfig;

fn bench_sweep(c: &mut Criterion) {
    let base = SimConfig { num_devices: 10, num_uavs: 2, ..SimConfig::default() };
    let spec = SweepSpec {
        param: SweepParam::Devices,
        values: vec![10.0, 20.0],
        seeds: (0..4).collect(),
        variants: vec![Variant::Proposed, Variant::NoCollab],
    };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| sweep(&base, &spec, Exec::Sequential).unwrap()));
    g.bench_function("parallel", |b| b.iter(|| sweep(&base, &spec, Exec::Parallel).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
