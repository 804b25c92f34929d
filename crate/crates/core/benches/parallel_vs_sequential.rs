use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctxscope_core::fixtures::{generate, SyntheticCorpusSpec};
use ctxscope_core::query::top_candidates_with;
use ctxscope_core::{build_index, BuildOptions, EntityId, Execution, ProjectorConfig, SemanticIndex};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn random_index(n: usize, dims: usize) -> SemanticIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let matrix = (0..n * dims).map(|_| rng.random_range(-20.0f32..20.0)).collect();
    let entities = (0..n).map(|i| EntityId::term(format!("t{i}"))).collect();
    SemanticIndex::from_rows(ProjectorConfig { seed: 3, dims, vocab_size: 1 << 20 }, entities, matrix).unwrap()
}

fn retrieval(c: &mut Criterion) {
    let index = random_index(50_000, 600);
    let q: Vec<f64> = index.unit_row(7);
    let mut group = c.benchmark_group("top_candidates_50k_x_600");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| top_candidates_with(&index, black_box(&q), None, 500, exec).unwrap()));
    }
    group.finish();
}

fn background(c: &mut Criterion) {
    let index = random_index(5_000, 128);
    let mut group = c.benchmark_group("background_5k_x_128");
    group.sample_size(10);
    for sample in [64, 512] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, sample), &sample, |b, &s| {
                b.iter(|| index.compute_background_with(s, 1, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn ingest(c: &mut Criterion) {
    let corpus = generate(&SyntheticCorpusSpec { n_docs: 3_000, terms_per_topic: 200, ..Default::default() }).unwrap();
    let mut group = c.benchmark_group("ingest_3k_docs");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = BuildOptions { dims: 256, background_sample: 256, exec, ..Default::default() };
        group.bench_function(name, |b| b.iter(|| build_index(&corpus, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, retrieval, background, ingest);
criterion_main!(benches);
