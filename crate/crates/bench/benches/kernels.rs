use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use onet_core::dataset::build_ode_dataset;
use onet_core::deeponet::{DeepONet, DeepONetConfig, LossKind, OperatorBatch};
use onet_core::grf::{sample_functions, GrfConfig};
use onet_core::nn::{AdamConfig, AdamState};
use onet_core::rng::seeded;
use onet_core::solvers::fft::{fft, Complex64};
use onet_core::solvers::{solve_burgers, solve_diffusion_reaction, BurgersConfig, DiffusionConfig};

fn training_step(c: &mut Criterion) {
    let (train, _) = build_ode_dataset(150, 1, 100, 0).unwrap();
    let batch = OperatorBatch::from_dataset(&train);
    let model = DeepONet::new(DeepONetConfig::standard(100, 1), &mut seeded(0)).unwrap();
    c.bench_function("deeponet loss+grad, 150x100 aligned", |b| {
        b.iter(|| black_box(model.loss_and_gradients(&batch, LossKind::Mse).unwrap()))
    });
    c.bench_function("deeponet adam step, 150x100 aligned", |b| {
        b.iter_batched(
            || {
                (
                    model.clone(),
                    AdamState::for_params(AdamConfig::default(), &model),
                )
            },
            |(mut m, mut adam)| {
                let (_, g) = m.loss_and_gradients(&batch, LossKind::Mse).unwrap();
                adam.step(&mut m, &g).unwrap();
                m
            },
            BatchSize::SmallInput,
        )
    });
}

fn grf(c: &mut Criterion) {
    c.bench_function("grf 1000 samples, 100 sensors", |b| {
        b.iter(|| black_box(sample_functions(&GrfConfig::unit_interval(), 1000, 1).unwrap()))
    });
}

fn solvers(c: &mut Criterion) {
    let u = sample_functions(&GrfConfig::unit_interval(), 1, 2).unwrap();
    let cfg = DiffusionConfig::default();
    c.bench_function("diffusion-reaction solve", |b| {
        b.iter(|| black_box(solve_diffusion_reaction(u.row(0), &u.sensors, &cfg).unwrap()))
    });

    let u0 = sample_functions(&GrfConfig::periodic_ten(), 1, 3).unwrap();
    let cfg = BurgersConfig::default();
    let mut group = c.benchmark_group("burgers");
    group.sample_size(10);
    group.bench_function("pseudo-spectral solve", |b| {
        b.iter(|| black_box(solve_burgers(u0.row(0), &cfg).unwrap()))
    });
    group.finish();

    let v: Vec<Complex64> = (0..1024)
        .map(|k| Complex64::new((k as f64).sin(), 0.0))
        .collect();
    c.bench_function("fft 1024", |b| b.iter(|| black_box(fft(&v))));
}

criterion_group!(benches, training_step, grf, solvers);
criterion_main!(benches);
