use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hydrasim::harness::{sweep, Execution};
use hydrasim::sim::Scenario;

fn sigma_sweep(c: &mut Criterion) {
    let mut base = Scenario::bundled("contact-y").expect("bundled");
    base.duration_s = 1.5;
    let grid: Vec<f64> = (0..8).map(|i| i as f64 * 2.5e-4).collect();
    let mut modes = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        modes.push(("parallel", Execution::Parallel { threads: None }));
    }
    let mut group = c.benchmark_group("sigma_sweep_8_cells");
    group.sample_size(10);
    for (name, exec) in modes {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep(&base, "impedance.sigma.y", &grid, exec).expect("sweep"))
        });
    }
    group.finish();
}

criterion_group!(benches, sigma_sweep);
criterion_main!(benches);
