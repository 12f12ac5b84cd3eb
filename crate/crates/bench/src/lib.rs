//! Criterion benchmarks of the hot kernels, kept in a library so the bench
//! target stays a two-line `criterion_main!`.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion, Throughput};
use lanmax_core::faultmem::{corrupt_weights, NoiseVector};
use lanmax_core::lanmax::{ols_gradient, EpochLog, LossRecord};
use lanmax_core::net::{backward_ste, forward, Architecture, BinaryNetwork, InnerOptConfig, InputShape};
use lanmax_core::{train_fixed_noise, Dataset, EnergyModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk_net(rng: &mut ChaCha8Rng) -> BinaryNetwork {
    let arch = Architecture {
        input: InputShape::flat(16),
        classes: 4,
        hidden: vec![128, 32],
        rho: 1.0,
        bias: true,
        conv_channels: 0,
        conv_kernel: 3,
    };
    BinaryNetwork::from_architecture(&arch, rng).unwrap()
}

fn batch(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<usize>) {
    let x = (0..n * 16).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = (0..n).map(|i| i % 4).collect();
    (x, y)
}

pub fn benchmarks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = desk_net(&mut rng);
    let weights = net.binary_weights();
    let (x, y) = batch(&mut rng, 128);

    let mut g = c.benchmark_group("network");
    g.throughput(Throughput::Elements(128));
    g.bench_function("forward_128", |b| b.iter(|| forward(&net, black_box(&weights), black_box(&x)).unwrap()));
    g.bench_function("backward_ste_128", |b| {
        b.iter(|| backward_ste(&net, black_box(&weights), black_box(&x), black_box(&y)).unwrap())
    });
    g.finish();

    let mut g = c.benchmark_group("corrupt_weights");
    for p in [0.0, 0.01, 0.1] {
        let noise = NoiseVector::from_values(&[p, p, p]).unwrap();
        g.throughput(Throughput::Elements(net.weight_counts().iter().sum::<usize>() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(p), &noise, |b, noise| {
            b.iter(|| corrupt_weights(black_box(&weights), noise, &mut rng).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("ols_gradient");
    for (layers, records) in [(3, 390), (30, 390)] {
        let log: EpochLog = (0..records)
            .map(|_| {
                let p: Vec<f64> = (0..layers).map(|_| 0.01 + 0.01 * rng.random_range(-1i32..=1) as f64).collect();
                LossRecord {
                    surrogate: 1.0 + p.iter().sum::<f64>() + rng.random_range(-0.1..0.1),
                    perturbed_p: NoiseVector::from_values(&p).unwrap(),
                }
            })
            .collect();
        g.bench_with_input(BenchmarkId::new("layers", layers), &log, |b, log| {
            b.iter(|| ols_gradient(black_box(log)).unwrap())
        });
    }
    g.finish();

    let (xs, ys) = batch(&mut rng, 4096);
    let data = Dataset::new(InputShape::flat(16), 4, xs, ys).unwrap();
    let inner = InnerOptConfig {
        epochs: 1,
        ..Default::default()
    };
    let energy = EnergyModel::new(12.8, 1, net.weight_counts()).unwrap();
    let noise = NoiseVector::from_values(&[0.01, 0.01, 0.01]).unwrap();
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    g.throughput(Throughput::Elements(4096));
    g.bench_function("epoch_4096", |b| {
        b.iter(|| train_fixed_noise(&data, net.clone(), &inner, &noise, &energy, &mut rng).unwrap())
    });
    g.finish();
}
