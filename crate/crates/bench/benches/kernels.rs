use clwe_bench::unit_rows;
use clwe_core::domainflow::{discriminator_objective, generator_objective, GenTargetMode, LossWeights};
use clwe_core::refine::procrustes;
use clwe_core::trainer::{AlignmentModel, TrainConfig};
use clwe_core::CslsIndex;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn csls(c: &mut Criterion) {
    let mut group = c.benchmark_group("csls_nearest");
    for &n in &[1000usize, 4000] {
        let queries = unit_rows(n, 300, 1);
        let targets = unit_rows(n, 300, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let index = CslsIndex::build(targets.view(), 10);
                black_box(index.with_queries(queries.view()).nearest_all())
            })
        });
    }
    group.finish();
}

fn procrustes_fit(c: &mut Criterion) {
    let x = unit_rows(5000, 300, 3);
    let y = unit_rows(5000, 300, 4);
    c.bench_function("procrustes_5000x300", |b| {
        b.iter(|| black_box(procrustes(x.view(), y.view()).unwrap()))
    });
}

fn training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("objective");
    for &hidden in &[256usize, 2048] {
        let config = TrainConfig {
            latent_dim: 300,
            disc_hidden: vec![hidden, hidden],
            ..TrainConfig::default()
        };
        let model = AlignmentModel::init(&config, 300, &mut ChaCha8Rng::seed_from_u64(5));
        let xs = unit_rows(32, 300, 6);
        let xt = unit_rows(32, 300, 7);
        group.bench_with_input(BenchmarkId::new("discriminator", hidden), &hidden, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            b.iter(|| {
                black_box(
                    discriminator_objective(&model.mapping, &model.critics, xs.view(), xt.view(), 0.6, true, &mut rng)
                        .unwrap(),
                )
            })
        });
        group.bench_with_input(BenchmarkId::new("generator", hidden), &hidden, |b, _| {
            b.iter(|| {
                black_box(
                    generator_objective(
                        &model.mapping,
                        &model.critics,
                        xs.view(),
                        xt.view(),
                        0.6,
                        GenTargetMode::Literal,
                        LossWeights::default(),
                    )
                    .unwrap(),
                )
            })
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = csls, procrustes_fit, training_step
}
criterion_main!(benches);
