use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use papq::audit::attack_score;
use papq::pmw::LabelMatrix;
use papq::{build_cover, pmw_release, prvq, Distribution, HypothesisClass, PmwConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cover(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dist = Distribution::uniform(0.0, 1.0).unwrap();
    let class = HypothesisClass::thresholds(0.0, 1.0).unwrap();
    let mut group = c.benchmark_group("build_cover");
    for m in [100, 1000, 10_000] {
        let w = dist.sample_n(m, &mut rng);
        group.bench_with_input(BenchmarkId::new("thresholds", m), &w, |b, w| {
            b.iter(|| build_cover(&class, black_box(w)).unwrap())
        });
    }
    group.finish();
}

fn pmw(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<Vec<i8>> = (0..32)
        .map(|_| (0..128).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
        .collect();
    let queries = LabelMatrix::new(labels).unwrap();
    let data: Vec<usize> = (0..50_000).map(|_| rng.gen_range(0..128)).collect();
    let cfg = PmwConfig::new(0.1, 0.1, 1.0, 1e-5).unwrap();
    c.bench_function("pmw_release/128x32", |b| {
        b.iter(|| pmw_release(black_box(&data), &queries, &cfg, &mut rng).unwrap())
    });
}

fn end_to_end(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dist = Distribution::uniform(0.0, 1.0).unwrap();
    let class = HypothesisClass::thresholds(0.0, 1.0).unwrap();
    let w = dist.sample_n(500, &mut rng);
    let x = dist.sample_n(20_000, &mut rng);
    c.bench_function("prvq/thresholds_m500_n20000", |b| {
        b.iter(|| prvq(black_box(&x), &w, &class, 0.15, 0.1, 1.0, 1e-5, &mut rng).unwrap())
    });
}

fn score(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = 4096;
    let q: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let sign = |rng: &mut ChaCha8Rng| -> Vec<i8> { (0..p).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect() };
    let (y, r) = (sign(&mut rng), sign(&mut rng));
    c.bench_function("attack_score/4096", |b| {
        b.iter(|| attack_score(black_box(&q), &y, &r).unwrap())
    });
}

criterion_group!(benches, cover, pmw, end_to_end, score);
criterion_main!(benches);
