use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use qclp_core::classic::{self, LineConfig, SkipGramConfig, WalkConfig};
use qclp_core::corpus::{self, ConceptVocab};
use qclp_core::eval::{self, ScoredEdge};
use qclp_core::predict::{self, Graph};
use qclp_core::timedecay::{self, TimeDecayConfig};
use qclp_core::{
    Arch, CooccurrenceRecord, Document, EdgeSplit, EmbeddingMatrix, EmbeddingSource, ModelConfig, SplitSpec,
    TemporalGraph,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const N: usize = 400;

fn records(seed: u64) -> Vec<CooccurrenceRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..N {
        for v in u + 1..N {
            let p = if (u < N / 2) == (v < N / 2) { 0.04 } else { 0.002 };
            if rng.random::<f64>() < p {
                let year = if rng.random::<f64>() < 0.85 {
                    rng.random_range(2011..=2018)
                } else {
                    rng.random_range(2019..=2020)
                };
                out.push(CooccurrenceRecord {
                    u,
                    v,
                    year,
                    doc_id: String::new(),
                });
            }
        }
    }
    out
}

fn fixture() -> (TemporalGraph, EdgeSplit) {
    let g = TemporalGraph::build(&records(1), N).unwrap();
    let split = EdgeSplit::make(&g, &SplitSpec::new(2018, 2019, 2020).unwrap(), 1).unwrap();
    (g, split)
}

fn bench_corpus(c: &mut Criterion) {
    let vocab = ConceptVocab::new((0..500).map(|i| format!("concept{i} state")));
    let mut rng = StdRng::seed_from_u64(2);
    let docs: Vec<Document> = (0..2000)
        .map(|i| {
            let words: Vec<String> = (0..60)
                .map(|_| match rng.random_range(0..4) {
                    0 => format!("concept{} state", rng.random_range(0..500)),
                    _ => "filler".to_string(),
                })
                .collect();
            Document {
                id: i.to_string(),
                year: 2015,
                title: "title".into(),
                abstract_text: words.join(" "),
            }
        })
        .collect();
    c.bench_function("extract_cooccurrences/2000 docs", |b| {
        b.iter(|| corpus::extract_cooccurrences(black_box(&docs), &vocab))
    });
}

fn bench_classic(c: &mut Criterion) {
    let (g, _) = fixture();
    let adj = g.adjacency();
    let walk = WalkConfig {
        num_walks: 4,
        walk_len: 40,
        ..WalkConfig::default()
    };
    c.bench_function("walks/uniform", |b| {
        b.iter(|| classic::random_walks(adj, &walk).unwrap())
    });
    let biased = WalkConfig { p: 0.5, q: 2.0, ..walk };
    c.bench_function("walks/node2vec", |b| {
        b.iter(|| classic::biased_walks(adj, &biased).unwrap())
    });

    let sg = SkipGramConfig {
        dim: 32,
        window: 5,
        epochs: 1,
        ..SkipGramConfig::default()
    };
    let mut group = c.benchmark_group("embeddings");
    group.sample_size(10);
    group.bench_function("deepwalk/d32", |b| {
        b.iter(|| classic::deepwalk(adj, &walk, &sg).unwrap())
    });
    let line = LineConfig {
        dim: 32,
        epochs: 1,
        ..LineConfig::default()
    };
    group.bench_function("line/d32", |b| b.iter(|| classic::train_line(adj, &line).unwrap()));
    group.finish();
}

fn bench_time_decay(c: &mut Criterion) {
    let (g, _) = fixture();
    let cfg = TimeDecayConfig::for_training_window(2011, 2018, 0.3, 16);
    let mut group = c.benchmark_group("time_decay");
    group.sample_size(10);
    group.bench_function("full/d16", |b| {
        b.iter(|| timedecay::time_decay_embedding(&g, &cfg).unwrap())
    });
    group.finish();
}

fn bench_metrics(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(3);
    let scored: Vec<ScoredEdge> = (0..20_000)
        .map(|i| ScoredEdge::new(i, i + 1, (rng.random_range(0..1000) as f64) / 1000.0, rng.random()))
        .collect();
    c.bench_function("auroc/20k", |b| b.iter(|| eval::auroc(black_box(&scored)).unwrap()));
    c.bench_function("average_precision/20k", |b| {
        b.iter(|| eval::average_precision(black_box(&scored)).unwrap())
    });
}

fn bench_training(c: &mut Criterion) {
    let (_, split) = fixture();
    let graph = Graph::new(N, &split.train_pos);
    let mut rng = StdRng::seed_from_u64(4);
    let rows: Vec<Vec<f64>> = (0..N)
        .map(|_| (0..32).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let feats = EmbeddingMatrix::from_rows(&rows, EmbeddingSource::Other("bench".into())).unwrap();
    let mut group = c.benchmark_group("train/10 epochs");
    group.sample_size(10);
    for arch in Arch::ALL {
        let cfg = ModelConfig {
            hidden: 32,
            epochs: 10,
            patience: 10,
            ..ModelConfig::new(arch)
        };
        group.bench_function(arch.name(), |b| {
            b.iter_batched(
                || cfg.clone(),
                |cfg| predict::train(&cfg, &feats, &split, &graph).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_corpus,
    bench_classic,
    bench_time_decay,
    bench_metrics,
    bench_training
);
criterion_main!(benches);
