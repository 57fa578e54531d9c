//! Corpus loading, concept matching and co-occurrence extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub year: i32,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

/// One co-mention of two concepts in one document. Always `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CooccurrenceRecord {
    pub u: usize,
    pub v: usize,
    pub year: i32,
    pub doc_id: String,
}

/// Lowercase, trim, and collapse internal whitespace runs to one space.
pub fn normalize_concept(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ConceptVocab {
    concepts: Vec<String>,
    index: HashMap<String, usize>,
}

impl ConceptVocab {
    /// Build from raw strings. Entries that normalize to an empty string or to
    /// an already-seen concept are dropped; ids are assigned densely in order.
    pub fn new<I, S>(raw: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = ConceptVocab::default();
        let mut dropped = 0usize;
        for r in raw {
            let c = normalize_concept(r.as_ref());
            if c.is_empty() || vocab.index.contains_key(&c) {
                dropped += 1;
                continue;
            }
            vocab.index.insert(c.clone(), vocab.concepts.len());
            vocab.concepts.push(c);
        }
        if dropped > 0 {
            log::debug!("vocabulary: dropped {dropped} empty or duplicate entries");
        }
        vocab
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn id(&self, concept: &str) -> Option<usize> {
        self.index.get(&normalize_concept(concept)).copied()
    }

    pub fn concept(&self, id: usize) -> &str {
        &self.concepts[id]
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }
}

/// Decides which vocabulary concepts a document mentions.
pub trait ConceptMatcher: Sync {
    fn matches(&self, doc: &Document) -> BTreeSet<usize>;
}

/// Case-insensitive whole-token phrase matching.
///
/// Token boundaries are non-alphanumeric characters, so `spin-orbit` and
/// `spin orbit` are the same phrase. No stemming: `quasiparticles` does not
/// match `quasiparticle`. Title and abstract are matched separately so a
/// phrase cannot straddle the two.
pub struct TokenMatcher {
    // first token -> (concept id, full token sequence)
    by_head: HashMap<String, Vec<(usize, Vec<String>)>>,
}

impl TokenMatcher {
    pub fn new(vocab: &ConceptVocab) -> Self {
        let mut by_head: HashMap<String, Vec<(usize, Vec<String>)>> = HashMap::new();
        for (id, c) in vocab.concepts().iter().enumerate() {
            let toks = tokenize(c);
            if let Some(head) = toks.first() {
                by_head.entry(head.clone()).or_default().push((id, toks));
            }
        }
        Self { by_head }
    }

    fn scan(&self, text: &str, out: &mut BTreeSet<usize>) {
        let toks = tokenize(text);
        for i in 0..toks.len() {
            if let Some(cands) = self.by_head.get(&toks[i]) {
                for (id, phrase) in cands {
                    if toks.len() - i >= phrase.len() && toks[i..i + phrase.len()] == phrase[..] {
                        out.insert(*id);
                    }
                }
            }
        }
    }
}

impl ConceptMatcher for TokenMatcher {
    fn matches(&self, doc: &Document) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.scan(&doc.title, &mut out);
        self.scan(&doc.abstract_text, &mut out);
        out
    }
}

pub fn match_concepts(doc: &Document, vocab: &ConceptVocab) -> BTreeSet<usize> {
    TokenMatcher::new(vocab).matches(doc)
}

fn pairs_for(doc: &Document, ids: &BTreeSet<usize>) -> Vec<CooccurrenceRecord> {
    let ids: Vec<usize> = ids.iter().copied().collect();
    let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
    for (a, &u) in ids.iter().enumerate() {
        for &v in &ids[a + 1..] {
            out.push(CooccurrenceRecord {
                u,
                v,
                year: doc.year,
                doc_id: doc.id.clone(),
            });
        }
    }
    out
}

/// All unordered concept pairs per document, sorted by `(u, v, year, doc_id)`.
pub fn extract_cooccurrences(docs: &[Document], vocab: &ConceptVocab) -> Vec<CooccurrenceRecord> {
    extract_with(docs, &TokenMatcher::new(vocab))
}

pub fn extract_with<M: ConceptMatcher>(docs: &[Document], matcher: &M) -> Vec<CooccurrenceRecord> {
    let mut records: Vec<CooccurrenceRecord> = docs
        .par_iter()
        .flat_map_iter(|d| pairs_for(d, &matcher.matches(d)))
        .collect();
    records.par_sort_unstable();
    records
}

/// Inclusive `[min_year, max_year]` filter applied before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub min_year: i32,
    pub max_year: i32,
}

impl YearWindow {
    pub fn contains(&self, year: i32) -> bool {
        (self.min_year..=self.max_year).contains(&year)
    }
}

/// Like [`extract_cooccurrences`] but skips documents outside `window`.
/// Returns the records and the number of skipped documents.
pub fn extract_in_window(
    docs: &[Document],
    vocab: &ConceptVocab,
    window: YearWindow,
) -> (Vec<CooccurrenceRecord>, usize) {
    let kept: Vec<Document> = docs.iter().filter(|d| window.contains(d.year)).cloned().collect();
    let skipped = docs.len() - kept.len();
    if skipped > 0 {
        log::info!(
            "skipped {skipped} documents outside {}..={}",
            window.min_year,
            window.max_year
        );
    }
    (extract_cooccurrences(&kept, vocab), skipped)
}

fn str_field(obj: &serde_json::Map<String, Value>, field: &'static str, line: usize) -> Result<String> {
    match obj.get(field) {
        None => Err(Error::MissingField { field, line }),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(Error::Malformed {
            line,
            msg: format!("field '{field}' must be a string, got {other}"),
        }),
    }
}

fn parse_document(text: &str, line: usize) -> Result<Document> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Malformed {
        line,
        msg: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Malformed {
        line,
        msg: "expected a JSON object".into(),
    })?;
    let id = str_field(obj, "id", line)?;
    let year = match obj.get("year") {
        None => return Err(Error::MissingField { field: "year", line }),
        Some(v) => v
            .as_i64()
            .and_then(|y| i32::try_from(y).ok())
            .ok_or_else(|| Error::Malformed {
                line,
                msg: format!("field 'year' must be an integer, got {v}"),
            })?,
    };
    let title = str_field(obj, "title", line)?;
    let abstract_text = str_field(obj, "abstract", line)?;
    Ok(Document {
        id,
        year,
        title,
        abstract_text,
    })
}

/// Read a JSON-lines corpus. Blank lines are ignored; line numbers are 1-based.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_document(&line, k + 1)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::Malformed {
                line: k + 1,
                msg: format!("duplicate document id {:?}", doc.id),
            });
        }
        docs.push(doc);
    }
    log::info!("loaded {} documents from {}", docs.len(), path.display());
    Ok(docs)
}

pub fn write_records_tsv<W: Write>(records: &[CooccurrenceRecord], w: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "u\tv\tyear\tdoc_id")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}\t{}", r.u, r.v, r.year, r.doc_id)?;
    }
    w.flush()
}

pub fn read_records_tsv(path: &Path) -> Result<Vec<CooccurrenceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if k == 0 || line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Malformed {
            line: k + 1,
            msg: msg.to_string(),
        };
        let mut f = line.splitn(4, '\t');
        let u = f.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad u"))?;
        let v = f.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad v"))?;
        let year = f.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad year"))?;
        let doc_id = f.next().ok_or_else(|| bad("missing doc_id"))?.to_string();
        out.push(CooccurrenceRecord { u, v, year, doc_id });
    }
    Ok(out)
}

/// Summary counts for a corpus run: documents per year, documents that
/// contributed at least one pair, and per-concept document frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub contributing_documents: usize,
    pub records: usize,
    pub documents_per_year: BTreeMap<i32, usize>,
    pub contributing_per_year: BTreeMap<i32, usize>,
    pub top_concepts: Vec<(String, usize)>,
}

impl CorpusStats {
    pub fn compute(docs: &[Document], vocab: &ConceptVocab, records: &[CooccurrenceRecord], top: usize) -> Self {
        let mut documents_per_year = BTreeMap::new();
        for d in docs {
            *documents_per_year.entry(d.year).or_insert(0) += 1;
        }
        let mut contributing: BTreeMap<&str, i32> = BTreeMap::new();
        let mut concept_docs: HashMap<usize, HashSet<&str>> = HashMap::new();
        for r in records {
            contributing.insert(&r.doc_id, r.year);
            concept_docs.entry(r.u).or_default().insert(&r.doc_id);
            concept_docs.entry(r.v).or_default().insert(&r.doc_id);
        }
        let mut contributing_per_year = BTreeMap::new();
        for year in contributing.values() {
            *contributing_per_year.entry(*year).or_insert(0) += 1;
        }
        let mut freq: Vec<(String, usize)> = concept_docs
            .into_iter()
            .map(|(c, ds)| (vocab.concept(c).to_string(), ds.len()))
            .collect();
        freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        freq.truncate(top);
        CorpusStats {
            documents: docs.len(),
            contributing_documents: contributing.len(),
            records: records.len(),
            documents_per_year,
            contributing_per_year,
            top_concepts: freq,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, year: i32, title: &str, abs: &str) -> Document {
        Document {
            id: id.into(),
            year,
            title: title.into(),
            abstract_text: abs.into(),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_concept("Quasiparticle  Poisoning "),
            "quasiparticle poisoning"
        );
        assert_eq!(normalize_concept("transmon"), "transmon");
        assert_eq!(normalize_concept("Hilbert Space"), "hilbert space");
        assert_eq!(normalize_concept(" \t "), "");
    }

    #[test]
    fn whole_token_matching() {
        let vocab = ConceptVocab::new(["transmon", "Hilbert Space", "quasiparticle"]);
        let t = vocab.id("transmon").unwrap();
        let h = vocab.id("hilbert space").unwrap();

        let d = doc("a", 2020, "Transmon readout", "");
        assert_eq!(match_concepts(&d, &vocab), BTreeSet::from([t]));

        let d = doc("b", 2020, "", "quasiparticles everywhere");
        assert!(match_concepts(&d, &vocab).is_empty());

        let d = doc(
            "c",
            2020,
            "A transmon in Hilbert-space",
            "the hilbert   space of a transmon",
        );
        assert_eq!(match_concepts(&d, &vocab), BTreeSet::from([t, h]));

        // no straddling across title/abstract boundary
        let d = doc("d", 2020, "on hilbert", "space");
        assert!(match_concepts(&d, &vocab).is_empty());
    }

    #[test]
    fn pairs_per_document() {
        let vocab = ConceptVocab::new(["a", "b", "c"]);
        let docs = vec![doc("x", 2020, "a b", "c a"), doc("y", 2021, "a", "")];
        let recs = extract_cooccurrences(&docs, &vocab);
        let got: Vec<_> = recs.iter().map(|r| (r.u, r.v, r.year)).collect();
        assert_eq!(got, vec![(0, 1, 2020), (0, 2, 2020), (1, 2, 2020)]);
    }

    #[test]
    fn window_skips_documents() {
        let vocab = ConceptVocab::new(["a", "b"]);
        let docs = vec![doc("x", 2006, "a b", ""), doc("y", 2010, "a b", "")];
        let (recs, skipped) = extract_in_window(
            &docs,
            &vocab,
            YearWindow {
                min_year: 2007,
                max_year: 2024,
            },
        );
        assert_eq!(skipped, 1);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].doc_id, "y");
    }

    #[test]
    fn corpus_errors_name_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"1\",\"year\":2020,\"title\":\"t\",\"abstract\":\"a\"}\n{\"id\":\"2\",\"title\":\"t\",\"abstract\":\"a\"}\n",
        )
        .unwrap();
        let err = load_corpus(&p).unwrap_err();
        assert_eq!(err.to_string(), "missing field 'year' at line 2");

        std::fs::write(&p, "{not json}\n").unwrap();
        assert!(matches!(load_corpus(&p), Err(Error::Malformed { line: 1, .. })));

        std::fs::write(&p, "").unwrap();
        assert!(load_corpus(&p).unwrap().is_empty());
    }

    #[test]
    fn records_tsv_round_trip() {
        let recs = vec![CooccurrenceRecord {
            u: 0,
            v: 3,
            year: 2011,
            doc_id: "arXiv:1".into(),
        }];
        let mut buf = Vec::new();
        write_records_tsv(&recs, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "u\tv\tyear\tdoc_id\n0\t3\t2011\tarXiv:1\n"
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.tsv");
        std::fs::write(&p, buf).unwrap();
        assert_eq!(read_records_tsv(&p).unwrap(), recs);
    }

    fn brute_force_pairs(ids: &BTreeSet<usize>) -> usize {
        let v: Vec<_> = ids.iter().collect();
        let mut count = 0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] < v[j] {
                    count += 1;
                }
            }
        }
        count
    }

    proptest! {
        #[test]
        fn record_counts_and_order(
            picks in proptest::collection::vec(proptest::collection::vec(0usize..8, 0..6), 1..12),
            seed in any::<u64>(),
        ) {
            let words = ["alpha", "beta", "gamma", "delta beta", "eps", "zeta", "eta", "theta"];
            let vocab = ConceptVocab::new(words);
            let docs: Vec<Document> = picks
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let text: Vec<&str> = p.iter().map(|&k| words[k]).collect();
                    doc(&format!("d{i}"), 2000 + i as i32, &text.join(", "), "")
                })
                .collect();
            let recs = extract_cooccurrences(&docs, &vocab);
            for r in &recs {
                prop_assert!(r.u < r.v);
            }
            for d in &docs {
                let k = match_concepts(d, &vocab);
                let n = recs.iter().filter(|r| r.doc_id == d.id).count();
                prop_assert_eq!(n, brute_force_pairs(&k));
            }
            // permutation invariance
            let mut shuffled = docs.clone();
            let len = shuffled.len();
            shuffled.rotate_left((seed as usize) % len);
            shuffled.reverse();
            prop_assert_eq!(extract_cooccurrences(&shuffled, &vocab), recs);
        }
    }
}
