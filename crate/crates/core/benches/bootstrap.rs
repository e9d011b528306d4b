use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use metadkit::profile::Metric;
use metadkit::resample::{bootstrap_metric, BootstrapConfig, Execution};
use metadkit::synth::{generate, SynthConfig};

fn bootstrap(c: &mut Criterion) {
    let trials = generate(&SynthConfig::gaussian(600, 0.67, -0.3, -0.5, 0.3, 1)).unwrap();
    #[allow(unused_mut)]
    let mut modes = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    modes.push(("parallel", Execution::Parallel { workers: None }));

    let mut group = c.benchmark_group("bootstrap_meta_d_500");
    group.sample_size(10);
    for (name, execution) in modes {
        let cfg = BootstrapConfig {
            n_resamples: 500,
            execution,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| bootstrap_metric(black_box(&trials), Metric::MetaD, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bootstrap);
criterion_main!(benches);
