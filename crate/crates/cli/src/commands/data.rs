use anyhow::{Context, Result};
use qclp_core::corpus::{self, CorpusStats, YearWindow};
use qclp_core::{seed, ConceptVocab, EdgeSplit, SplitSpec, TemporalGraph};
use serde_json::json;

use super::{check_fresh, hash_with_inputs, require_file};
use crate::cli::{IngestArgs, SplitArgs};
use crate::manifest::input_checksums;
use crate::usage;

pub const COOCCURRENCES: &str = "cooccurrences.tsv";
pub const STATS: &str = "corpus_stats.json";

pub fn ingest(a: &IngestArgs) -> Result<()> {
    require_file(&a.corpus, "--corpus")?;
    require_file(&a.vocab, "--vocab")?;
    let window = match (a.min_year, a.max_year) {
        (None, None) => None,
        (lo, hi) => {
            let w = YearWindow {
                min_year: lo.unwrap_or(i32::MIN),
                max_year: hi.unwrap_or(i32::MAX),
            };
            if w.min_year > w.max_year {
                return Err(usage("--min-year is after --max-year"));
            }
            Some(w)
        }
    };
    let inputs = input_checksums(&[&a.corpus, &a.vocab])?;
    let hash = hash_with_inputs(json!({ "command": "ingest", "window": window, "top": a.top }), &inputs);
    let Some(mut manifest) = check_fresh(&a.out, "ingest", &hash)? else {
        return Ok(());
    };

    let vocab = ConceptVocab::load(&a.vocab)?;
    if vocab.is_empty() {
        return Err(usage(format!("--vocab: no concepts in {}", a.vocab.display())));
    }
    let docs = corpus::load_corpus(&a.corpus).with_context(|| format!("reading {}", a.corpus.display()))?;
    let (records, skipped) = match window {
        Some(w) => corpus::extract_in_window(&docs, &vocab, w),
        None => (corpus::extract_cooccurrences(&docs, &vocab), 0),
    };
    let stats = CorpusStats::compute(&docs, &vocab, &records, a.top);
    log::info!(
        "{} documents, {} contributing, {} co-occurrence records over {} concepts",
        stats.documents,
        stats.contributing_documents,
        stats.records,
        vocab.len()
    );

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let tsv = a.out.join(COOCCURRENCES);
    let file = std::fs::File::create(&tsv).with_context(|| format!("creating {}", tsv.display()))?;
    corpus::write_records_tsv(&records, std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", tsv.display()))?;
    let mut text = serde_json::to_string_pretty(&json!({
        "concepts": vocab.len(),
        "skipped_documents": skipped,
        "stats": stats,
    }))?;
    text.push('\n');
    std::fs::write(a.out.join(STATS), text)?;

    manifest.record(&a.out, "ingest", "ingest", &hash, inputs, &[COOCCURRENCES, STATS])?;
    manifest.save(&a.out)
}

pub const SPLIT_FILES: [&str; 7] = [
    "train.tsv",
    "val.tsv",
    "test.tsv",
    "val_neg.tsv",
    "test_neg.tsv",
    "test_iso_neg.tsv",
    "split_meta.json",
];

pub fn split(a: &SplitArgs, master: u64) -> Result<()> {
    let spec = SplitSpec::new(a.train_end, a.val_end, a.test_end)?;
    require_file(&a.edges, "--edges")?;
    require_file(&a.vocab, "--vocab")?;
    let split_seed = seed::derive(master, "split", &[]);
    let inputs = input_checksums(&[&a.edges, &a.vocab])?;
    let hash = hash_with_inputs(json!({ "command": "split", "spec": spec, "seed": split_seed }), &inputs);
    let Some(mut manifest) = check_fresh(&a.out, "split", &hash)? else {
        return Ok(());
    };

    let n = ConceptVocab::load(&a.vocab)?.len();
    let records = corpus::read_records_tsv(&a.edges)?;
    let g = TemporalGraph::build(&records, n)?;
    let split = EdgeSplit::make(&g, &spec, split_seed)?;
    let meta = split.meta(spec, n);
    let c = meta.counts;
    log::info!(
        "train {} / val {} / test {} positives; {} isolated nodes touching {} test edges",
        c.train,
        c.val,
        c.test,
        meta.isolated_nodes,
        meta.isolated_test_edges
    );
    split.write_dir(&a.out, &meta)?;
    manifest.record(&a.out, "split", "split", &hash, inputs, &SPLIT_FILES)?;
    manifest.save(&a.out)
}
