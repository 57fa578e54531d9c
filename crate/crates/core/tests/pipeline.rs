//! Library-level runs from raw documents to test metrics.

use std::collections::HashSet;

use qclp_core::classic::{self, SkipGramConfig, WalkConfig};
use qclp_core::corpus;
use qclp_core::predict::{self, Graph};
use qclp_core::timedecay::{self, TimeDecayConfig};
use qclp_core::{Arch, ConceptVocab, Document, Edge, EdgeSplit, ModelConfig, SplitSpec, TemporalGraph};

fn doc(id: usize, year: i32, title: &str, body: &str) -> Document {
    Document {
        id: format!("d{id}"),
        year,
        title: title.into(),
        abstract_text: body.into(),
    }
}

/// Two topical clusters of six concepts each. Pair `i` of a cluster is first
/// mentioned in year `2011 + i % 10` and mentioned again the year after.
fn clustered_corpus() -> (ConceptVocab, Vec<Document>) {
    let names: Vec<String> = (0..12).map(|i| format!("term{i}")).collect();
    let vocab = ConceptVocab::new(&names);
    let mut docs = Vec::new();
    for block in 0..2 {
        let pairs = (0..6).flat_map(|a| (a + 1..6).map(move |b| (a, b)));
        for (i, (a, b)) in pairs.enumerate() {
            let (x, y) = (&names[block * 6 + a], &names[block * 6 + b]);
            let first = 2011 + (i % 10) as i32;
            for year in first..=(first + 1).min(2020) {
                let id = docs.len();
                docs.push(doc(id, year, &format!("On {x}"), &format!("and its relation to {y}")));
            }
        }
    }
    (vocab, docs)
}

#[test]
fn documents_to_split_to_features() {
    let (vocab, docs) = clustered_corpus();
    let records = corpus::extract_cooccurrences(&docs, &vocab);
    assert!(records.iter().all(|r| r.u < r.v));
    // no pair crosses clusters
    assert!(records.iter().all(|r| (r.u < 6) == (r.v < 6)));

    let g = TemporalGraph::build(&records, vocab.len()).unwrap();
    let spec = SplitSpec::new(2016, 2018, 2020).unwrap();
    let split = EdgeSplit::make(&g, &spec, 3).unwrap();
    let c = split.counts();
    assert_eq!(c.train + c.val + c.test, g.edge_count());
    for e in &split.train_pos {
        assert!(g.first_year(*e).unwrap() <= 2016);
    }
    for e in &split.test_pos {
        assert!(g.first_year(*e).unwrap() > 2018);
    }
    let all: HashSet<Edge> = g.edges().map(|(e, _)| e).collect();
    assert!(split.val_neg.iter().chain(&split.test_neg).all(|e| !all.contains(e)));

    let train_g = TemporalGraph::build(
        &records.iter().filter(|r| r.year <= 2016).cloned().collect::<Vec<_>>(),
        vocab.len(),
    )
    .unwrap();
    let walk = WalkConfig {
        num_walks: 5,
        walk_len: 20,
        seed: 1,
        ..WalkConfig::default()
    };
    let sg = SkipGramConfig {
        dim: 8,
        window: 3,
        epochs: 2,
        seed: 1,
        ..SkipGramConfig::default()
    };
    let dw = classic::deepwalk(train_g.adjacency(), &walk, &sg).unwrap();
    assert_eq!((dw.n(), dw.dim()), (12, 8));
    assert!(dw.is_finite());

    let cfg = TimeDecayConfig::for_training_window(2011, 2016, 0.3, 4);
    let td = timedecay::time_decay_embedding(&g, &cfg).unwrap();
    let both = dw.concat(&td).unwrap();
    assert_eq!(both.dim(), 12);
}

#[test]
fn reproducible_end_to_end_evaluation() {
    let (vocab, docs) = clustered_corpus();
    let records = corpus::extract_cooccurrences(&docs, &vocab);
    let g = TemporalGraph::build(&records, vocab.len()).unwrap();
    let split = EdgeSplit::make(&g, &SplitSpec::new(2016, 2018, 2020).unwrap(), 3).unwrap();
    assert!(
        !split.val_pos.is_empty() && !split.test_pos.is_empty(),
        "{:?}",
        split.counts()
    );
    let graph = Graph::new(vocab.len(), &split.train_pos);
    let rows: Vec<Vec<f64>> = (0..12)
        .map(|i| vec![f64::from(u8::from(i < 6)), f64::from(u8::from(i >= 6))])
        .collect();
    let feats =
        qclp_core::EmbeddingMatrix::from_rows(&rows, qclp_core::EmbeddingSource::Other("block".into())).unwrap();
    let cfg = ModelConfig {
        hidden: 8,
        epochs: 30,
        lr: 0.01,
        dropout: 0.0,
        ..ModelConfig::new(Arch::Gcn)
    };
    let a = predict::evaluate(&cfg, "block", &feats, &split, &graph, &[0, 1]);
    let b = predict::evaluate(&cfg, "block", &feats, &split, &graph, &[0, 1]);
    assert!(a.runs.iter().all(|r| r.error.is_none()), "{:?}", a.runs);
    assert_eq!(
        serde_json::to_string(&a.runs).unwrap(),
        serde_json::to_string(&b.runs).unwrap()
    );
    assert!(a.auroc.mean > 0.5, "{}", a.auroc.mean);
}
