//! Benchmarks for the hot paths: Gram construction, the projection factor,
//! the training loop under both storage strategies, and the ridge baseline.

use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use nysgm_core::{
    gen_toy, krr_solve, select_landmarks, train, KernelSpec, LandmarkStrategy, NystromFactor,
    StepSchedule, StorageStrategy, TrainConfig, DEFAULT_RTOL,
};

fn bench_gram(c: &mut Criterion) {
    let kernel = KernelSpec::gaussian(0.2).unwrap();
    let mut group = c.benchmark_group("gram_sym");
    for n in [128usize, 512] {
        let data = gen_toy(n, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| kernel.gram_sym(black_box(data.x.view())).unwrap())
        });
    }
    group.finish();
}

fn bench_factor(c: &mut Criterion) {
    let kernel = KernelSpec::gaussian(0.2).unwrap();
    let mut group = c.benchmark_group("nystrom_factor");
    for m in [32usize, 128] {
        let data = gen_toy(512, 2).unwrap();
        let idx = select_landmarks(512, m, LandmarkStrategy::FirstM, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| {
                NystromFactor::build(kernel.clone(), &data, black_box(&idx), DEFAULT_RTOL).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_train(c: &mut Criterion) {
    let kernel = KernelSpec::gaussian(0.2).unwrap();
    let n = 512;
    let data = gen_toy(n, 3).unwrap();
    let idx = select_landmarks(n, 64, LandmarkStrategy::FirstM, 0).unwrap();
    let factor = Arc::new(NystromFactor::build(kernel, &data, &idx, DEFAULT_RTOL).unwrap());

    let mut group = c.benchmark_group("train_512x64_T512");
    for (name, storage) in [
        ("precompute", StorageStrategy::PrecomputeCrossGram),
        ("on_the_fly", StorageStrategy::OnTheFly),
    ] {
        let config = TrainConfig::new(StepSchedule::constant(0.05), 4, 512, 7)
            .with_snapshot_stride(128)
            .with_storage(storage);
        group.bench_function(name, |b| {
            b.iter(|| train(black_box(&config), &data, &factor).unwrap())
        });
    }
    group.finish();
}

fn bench_krr(c: &mut Criterion) {
    let kernel = KernelSpec::gaussian(0.2).unwrap();
    let data = gen_toy(256, 4).unwrap();
    c.bench_function("krr_solve_256", |b| {
        b.iter(|| krr_solve(black_box(&data), &kernel, 0.01).unwrap())
    });
}

criterion_group!(benches, bench_gram, bench_factor, bench_train, bench_krr);
criterion_main!(benches);
