use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saw_core::policy::{LstmLayout, LstmNet};

fn net(hidden: usize, rng: &mut ChaCha8Rng) -> LstmNet {
    let layout = LstmLayout::new(60, &[hidden, hidden], 10, true).unwrap();
    LstmNet::random(layout, rng, 0.01)
}

fn inputs(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..60).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn lstm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g = c.benchmark_group("lstm");
    for hidden in [32, 128] {
        let mut p = net(hidden, &mut rng);
        let x = inputs(1, &mut rng).remove(0);
        g.bench_with_input(BenchmarkId::new("step", hidden), &hidden, |b, _| {
            b.iter(|| black_box(p.forward(black_box(&x)).unwrap()))
        });

        let xs = inputs(32, &mut rng);
        let d_out = vec![vec![0.1; p.layout.output]; xs.len()];
        g.bench_with_input(
            BenchmarkId::new("forward+backward 32 steps", hidden),
            &hidden,
            |b, _| {
                b.iter(|| {
                    p.reset_hidden();
                    p.forward_sequence(&xs).unwrap();
                    black_box(p.backward(&d_out).unwrap())
                })
            },
        );
    }
    g.finish();
}

criterion_group!(benches, lstm);
criterion_main!(benches);
