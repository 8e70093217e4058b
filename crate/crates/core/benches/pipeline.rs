use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use encalign::ceiling::noise_ceiling;
use encalign::crossval::{fit_encoding, make_folds, EncodingConfig};
use encalign::synth::{generate, SynthSpec};

fn spec() -> SynthSpec {
    SynthSpec {
        n_samples: 240,
        n_subjects: 4,
        n_layers: 1,
        shared_layer_gains: vec![1.0],
        interaction_layer_gains: vec![1.0],
        ..SynthSpec::default()
    }
    .with_seed(1)
}

/// Runs `f` on a pool of `threads` workers; `None` means the calling thread
/// with whatever the build provides.
fn on_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

fn pools() -> Vec<(&'static str, Option<usize>)> {
    if encalign::par::is_parallel() {
        vec![("sequential", Some(1)), ("parallel", Some(0))]
    } else {
        vec![("sequential", None)]
    }
}

fn bench_fit(c: &mut Criterion) {
    let data = generate(&spec()).unwrap();
    let x = &data.condition("joint").unwrap()[0];
    let y = &data.responses[0];
    let scheme = make_folds(x.nrows(), 6).unwrap();
    let cfg = EncodingConfig::default();
    let mut group = c.benchmark_group("fit_encoding");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &threads, |b, &t| {
            b.iter(|| on_pool(t, || fit_encoding(x, y, &scheme, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn bench_ceiling(c: &mut Criterion) {
    let data = generate(&spec()).unwrap();
    let scheme = make_folds(data.responses[0].nrows(), 6).unwrap();
    let cfg = EncodingConfig::default();
    let mut group = c.benchmark_group("noise_ceiling");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &threads, |b, &t| {
            b.iter(|| on_pool(t, || noise_ceiling(&data.responses, &scheme, &cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_ceiling);
criterion_main!(benches);
