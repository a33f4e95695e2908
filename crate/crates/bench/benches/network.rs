use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sritm_bench::uniform;
use sritm_core::trainer::{TrainConfig, Trainer};
use sritm_core::{Network, NetworkConfig, Tensor};

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    g.sample_size(10);
    let x: Tensor<f32> = uniform(&[1, 3, 32, 32], 1, 0.0, 1.0);
    for (name, cfg) in [
        ("full_sf2_32px", NetworkConfig::full(2)),
        ("full_sf4_32px", NetworkConfig::full(4)),
        ("toy_sf2_32px", NetworkConfig::toy(2)),
    ] {
        let net = Network::<f32>::new(cfg, 0).unwrap();
        g.bench_function(name, |bench| bench.iter(|| net.forward(black_box(&x)).unwrap()));
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let cfg = TrainConfig {
        stage1_iters: 0,
        stage2_iters: usize::MAX / 2,
        lr_weights: 1e-4,
        lr_biases: 1e-5,
        batch_size: 4,
        eval_every: 0,
        checkpoint_every: 0,
        checkpoint_dir: None,
        seed: 0,
    };
    let mut trainer = Trainer::new(NetworkConfig::toy(2).with_width(16), cfg).unwrap();
    let x: Tensor<f32> = uniform(&[4, 3, 16, 16], 2, 0.0, 1.0);
    let y: Tensor<f32> = uniform(&[4, 3, 32, 32], 3, 0.0, 1.0);
    c.bench_function("train_step_desk_batch4", |bench| {
        bench.iter(|| trainer.train_step(black_box(&x), &y).unwrap())
    });
}

criterion_group!(benches, forward, train_step);
criterion_main!(benches);
