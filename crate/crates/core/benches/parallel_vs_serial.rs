//! Serial vs rayon-parallel execution of the data-parallel kernels:
//! flat-index scan, batch hashing and sharded search.

use std::hint::black_box;

use agentrag_core::embedder::{Embedder, EmbedderConfig, Embedding};
use agentrag_core::vecindex::{Metric, VectorIndex};
use agentrag_core::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 128;

fn random_items(n: usize, seed: u64) -> Vec<(u64, Embedding)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|id| {
            (
                id,
                Embedding::new((0..DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect()),
            )
        })
        .collect()
}

fn search(c: &mut Criterion) {
    let items = random_items(50_000, 1);
    let mut flat = VectorIndex::flat(DIM, Metric::Ip);
    flat.add_batch(&items).unwrap();
    let mut sharded = VectorIndex::sharded(DIM, Metric::Ip, 8).unwrap();
    sharded.add_batch(&items).unwrap();
    let query = random_items(1, 2).pop().unwrap().1;

    let mut g = c.benchmark_group("search_top10_50k");
    for exec in [Exec::Serial, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::new("flat", format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| flat.search_with(black_box(query.as_slice()), 10, exec).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sharded8", format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| sharded.search_with(black_box(query.as_slice()), 10, exec).unwrap())
        });
    }
    g.finish();
}

fn embed(c: &mut Criterion) {
    let texts: Vec<String> = (0..256).map(|i| format!("chunk {i} {}", "x".repeat(800))).collect();
    let mut g = c.benchmark_group("embed_batch_256x768");
    for exec in [Exec::Serial, Exec::Parallel] {
        let e = Embedder::new(EmbedderConfig::default()).unwrap().with_exec(exec);
        g.bench_function(format!("{exec:?}"), |b| b.iter(|| e.embed_batch(black_box(&texts))));
    }
    g.finish();
}

criterion_group!(benches, search, embed);
criterion_main!(benches);
