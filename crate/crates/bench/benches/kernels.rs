use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermodev::diagnostics::ess;
use thermodev::hmc::{hmc_sample, HmcConfig};
use thermodev::model::BayesModel;
use thermodev_bench::briere_fixture;

fn gradient(c: &mut Criterion) {
    let m = briere_fixture(20);
    let u = m.init_center();
    let (mut gp, mut gl) = (vec![0.0; m.dim()], vec![0.0; m.dim()]);
    c.bench_function("log posterior gradient, 120 obs", |b| b.iter(|| m.eval_grad(black_box(&u), &mut gp, &mut gl)));
}

fn sampling(c: &mut Criterion) {
    let m = briere_fixture(5);
    let cfg = HmcConfig { n_warmup: 200, n_draws: 200, n_chains: 1, seed: 2, ..Default::default() };
    let mut g = c.benchmark_group("hmc");
    g.sample_size(10);
    g.bench_function("briere inverse-gamma, 400 iterations", |b| b.iter(|| hmc_sample(&m, &cfg).unwrap()));
    g.finish();
}

fn effective_size(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chains: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let mut x = 0.0;
            (0..1000)
                .map(|_| {
                    x = 0.7 * x + rng.random::<f64>() - 0.5;
                    x
                })
                .collect()
        })
        .collect();
    c.bench_function("ess, 4 x 1000", |b| b.iter(|| ess(black_box(&chains))));
}

criterion_group!(benches, gradient, sampling, effective_size);
criterion_main!(benches);
