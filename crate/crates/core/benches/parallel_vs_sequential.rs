use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smallball_core::functionals::{divergence_experiment, dyadic_horizons, DivergenceRun};
use smallball_core::smallball::{window_maxima, SmallBallRun};
use smallball_core::testfuncs::FunctionSpec;
use smallball_core::{Parallelism, ProcessSpec};

fn modes() -> [(&'static str, Parallelism); 2] {
    [
        ("sequential", Parallelism::Sequential),
        ("parallel", Parallelism::Parallel),
    ]
}

fn small_ball(c: &mut Criterion) {
    let mut g = c.benchmark_group("window_maxima");
    g.sample_size(10);
    for spec in [
        ProcessSpec::StationaryOu { theta: 1.0 },
        ProcessSpec::Fbm { hurst: 0.7 },
    ] {
        for (name, mode) in modes() {
            let run = SmallBallRun {
                replicates: 2000,
                dt: 1.0 / 256.0,
                seed: 1,
                parallelism: mode,
            };
            g.bench_with_input(BenchmarkId::new(name, spec), &spec, |b, spec| {
                b.iter(|| window_maxima(spec, 0.5, 0.5, &run).unwrap())
            });
        }
    }
    g.finish();
}

fn divergence(c: &mut Criterion) {
    let mut g = c.benchmark_group("divergence");
    g.sample_size(10);
    let spec = ProcessSpec::StationaryOu { theta: 1.0 };
    let f = FunctionSpec::square();
    let horizons = dyadic_horizons(1.0, 7);
    for (name, mode) in modes() {
        let run = DivergenceRun {
            replicates: 32,
            seed: 2,
            dt: 1.0 / 64.0,
            parallelism: mode,
        };
        g.bench_function(name, |b| {
            b.iter(|| divergence_experiment(&spec, &f, 0.5, &horizons, &run).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, small_ball, divergence);
criterion_main!(benches);
