//! Synthetic data and helpers shared by the CLI and acceptance tests.
#![allow(dead_code)]

use std::ffi::OsString;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use qclp_core::llm::{build_prompt, Cache, CacheEntry, HttpResponse, Transport};
use qclp_core::{CooccurrenceRecord, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Transport that counts calls and always fails.
#[derive(Default)]
pub struct CountingTransport {
    pub calls: AtomicUsize,
}

impl Transport for CountingTransport {
    fn post_json(&self, _: &str, _: &[(String, String)], _: &str, _: Duration) -> qclp_core::Result<HttpResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(Error::Transport("network disabled in tests".into()))
    }
}

impl CountingTransport {
    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Run the CLI in-process; returns the exit code.
pub fn run(args: &[&str], transport: &Arc<CountingTransport>) -> i32 {
    let mut argv: Vec<OsString> = vec!["qclp".into()];
    argv.extend(args.iter().map(OsString::from));
    qclp_cli::run_with(argv, transport.clone())
}

pub fn run_offline(args: &[&str]) -> i32 {
    run(args, &Arc::new(CountingTransport::default()))
}

pub fn block_of(i: usize, n: usize) -> usize {
    usize::from(i >= n / 2)
}

/// Year for one synthetic edge: 85% spread over 2011..=2018, 5% in 2019,
/// 10% in 2020. With a (2018, 2019, 2020) spec this gives an 85:5:10 split.
pub fn synthetic_year(rng: &mut ChaCha8Rng) -> i32 {
    let r: f64 = rng.random();
    if r < 0.85 {
        rng.random_range(2011..=2018)
    } else if r < 0.90 {
        2019
    } else {
        2020
    }
}

/// Two equal blocks (`i < n/2` and the rest); each pair is an edge with
/// probability `p_in` inside a block and `p_out` across, timestamped by
/// [`synthetic_year`]. One record per edge.
pub fn two_block_records(seed: u64, n: usize, p_in: f64, p_out: f64) -> Vec<CooccurrenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block_of(u, n) == block_of(v, n) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                let year = synthetic_year(&mut rng);
                out.push(CooccurrenceRecord {
                    u,
                    v,
                    year,
                    doc_id: format!("e{}", out.len()),
                });
            }
        }
    }
    out
}

/// Concept names that tokenize as single words.
pub fn concept_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("concept{i:03}")).collect()
}

/// A JSON-lines corpus over `concepts`: each document mentions two to four
/// concepts from one block, in years 2011..=2020.
pub fn write_corpus(path: &Path, concepts: &[String], docs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = concepts.len();
    let mut lines = String::new();
    for d in 0..docs {
        let b = rng.random_range(0..2usize);
        let k = rng.random_range(2..=4usize);
        let picks: Vec<&str> = (0..k)
            .map(|_| concepts[b * (n / 2) + rng.random_range(0..n / 2)].as_str())
            .collect();
        let (title, body) = picks.split_at(1);
        let doc = serde_json::json!({
            "id": format!("doc{d}"),
            "year": synthetic_year(&mut rng),
            "title": format!("Notes on {}", title[0]),
            "abstract": format!("We relate {} in this study.", body.join(", ")),
        });
        lines.push_str(&doc.to_string());
        lines.push('\n');
    }
    std::fs::write(path, lines).unwrap();
}

pub fn write_vocab(path: &Path, concepts: &[String]) {
    std::fs::write(path, concepts.join("\n") + "\n").unwrap();
}

pub fn fixture_text(model: &str, concept: &str) -> String {
    format!("{concept} is described by {model} as a building block of quantum devices.")
}

/// Record generation and embedding fixtures for every concept.
pub fn write_fixture_cache(dir: &Path, concepts: &[String], gen_models: &[&str], embed_model: &str, dim: usize) {
    let cache = Cache::new(dir);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for model in gen_models {
        for c in concepts {
            let text = fixture_text(model, c);
            cache
                .put(&CacheEntry::generation(model, &build_prompt(c).unwrap(), &text))
                .unwrap();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            cache.put(&CacheEntry::embedding(embed_model, &text, v)).unwrap();
        }
    }
}
