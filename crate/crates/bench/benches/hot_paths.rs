use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mtptune_core::data::synth_matrix_completion;
use mtptune_core::hpo::{hyperband_brackets, sh_schedule};
use mtptune_core::net::{train, BranchSpec, HeadSpec, LossKind, OutputKind, TrainConfig, TwoBranchModel};
use mtptune_core::surrogate::{expected_improvement, Observation, RandomForest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schedules(c: &mut Criterion) {
    c.bench_function("hyperband_brackets R=243", |b| {
        b.iter(|| hyperband_brackets(black_box(243), 3))
    });
    c.bench_function("sh_schedule 81x1 to 81", |b| {
        b.iter(|| sh_schedule(black_box(81), 1, 3, 81))
    });
}

fn surrogates(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let observations: Vec<Observation> = (0..200)
        .map(|_| {
            let x: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            let loss = x.iter().map(|v| (v - 0.3).powi(2)).sum();
            Observation { x, budget: 27, loss }
        })
        .collect();
    c.bench_function("random forest fit 200x8", |b| {
        b.iter(|| RandomForest::fit(&observations, 10, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap())
    });
    let forest = RandomForest::fit(&observations, 10, 1, &mut rng).unwrap();
    let queries: Vec<Vec<f64>> = (0..1000).map(|_| (0..8).map(|_| rng.random()).collect()).collect();
    c.bench_function("random forest predict + EI x1000", |b| {
        b.iter(|| {
            queries
                .iter()
                .map(|q| {
                    let (mu, sigma) = forest.predict(q);
                    expected_improvement(mu, sigma, 0.1)
                })
                .sum::<f64>()
        })
    });
}

fn training(c: &mut Criterion) {
    let d = synth_matrix_completion(100, 80, 3, 0.01, 0.3, 0).unwrap().bundle.train;
    let (tr, val) = d.triplets.split_at(d.triplets.len() * 4 / 5);
    let spec = BranchSpec::lookup(32);
    let model = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 0).unwrap();
    let cfg = TrainConfig::new(0.01, 256, LossKind::Mse, 0);
    c.bench_function("train one epoch 100x80 dim 32", |b| {
        b.iter_batched(
            || model.clone(),
            |mut m| train(&mut m, &d, tr, val, &cfg, 1, None).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, schedules, surrogates, training);
criterion_main!(benches);
