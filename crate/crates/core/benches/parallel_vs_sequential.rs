//! Same workloads on a one-thread rayon pool and on the default pool.
//! Built without the `parallel` feature, both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hamcert_core::certify::{sweep, Mode, SweepSetup};
use hamcert_core::cone::{sample_cone_boundary, sample_seed};
use hamcert_core::constants::assemble_cone_constants;
use hamcert_core::problem::ProblemSpec;
use hamcert_core::solver::Nystrom;
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    vec![
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn bench(c: &mut Criterion) {
    let spec = ProblemSpec::example();
    let quad = spec.quadrature();
    let cc = assemble_cone_constants(&spec, &quad, &spec.optimizer).unwrap();
    let op = Nystrom::new(&spec, 256, &quad).unwrap();
    let u = sample_cone_boundary(&cc, 256, 1.0, sample_seed(spec.seed, 0)).unwrap();
    let setup = SweepSetup {
        axes: vec!["lambda1:0:0.1:16".parse().unwrap(), "eta11:0:0.5:16".parse().unwrap()],
        mode: Mode::Sstar,
        rho1: 1e-3,
        rho2: 1.0,
        i0: None,
        nonexistence: None,
    };

    let mut g = c.benchmark_group("apply_T");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| op.apply(&spec, &u, &quad).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("cone_constants");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| assemble_cone_constants(&spec, &quad, &spec.optimizer).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("sweep_16x16");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| sweep(&spec, &cc, &setup).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
