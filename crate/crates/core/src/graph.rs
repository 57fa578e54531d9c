//! Temporal co-occurrence graph, chronological splits and negative sampling.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::CooccurrenceRecord;
use crate::error::{Error, Result};
use crate::seed;

/// Undirected edge stored in canonical `u < v` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    /// Canonicalizes the endpoint order. Panics on a self-loop.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self-loop {a}-{a}");
        if a < b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.u == node || self.v == node
    }
}

/// Per-node sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[Edge]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for e in edges {
            neighbors[e.u].push(e.v);
            neighbors[e.v].push(e.u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Sorted intersection of the two neighbor lists.
    pub fn common_neighbors(&self, a: usize, b: usize) -> Vec<usize> {
        let (x, y) = (&self.neighbors[a], &self.neighbors[b]);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(x[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TemporalGraph {
    n: usize,
    first_year: BTreeMap<Edge, i32>,
    yearly_counts: BTreeMap<i32, BTreeMap<Edge, u32>>,
    adjacency: Adjacency,
}

impl TemporalGraph {
    /// Deduplicate records into edges. `first_year` is the earliest record
    /// year per pair; `yearly_counts[y][e]` counts the records of pair `e` in
    /// year `y` (one record per document).
    pub fn build(records: &[CooccurrenceRecord], n: usize) -> Result<Self> {
        let mut first_year: BTreeMap<Edge, i32> = BTreeMap::new();
        let mut yearly_counts: BTreeMap<i32, BTreeMap<Edge, u32>> = BTreeMap::new();
        for r in records {
            for node in [r.u, r.v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if r.u == r.v {
                return Err(Error::InvalidConfig(format!("self-loop record on node {}", r.u)));
            }
            let e = Edge::new(r.u, r.v);
            first_year
                .entry(e)
                .and_modify(|y| *y = (*y).min(r.year))
                .or_insert(r.year);
            *yearly_counts.entry(r.year).or_default().entry(e).or_insert(0) += 1;
        }
        let edges: Vec<Edge> = first_year.keys().copied().collect();
        let adjacency = Adjacency::from_edges(n, &edges);
        Ok(Self {
            n,
            first_year,
            yearly_counts,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.first_year.len()
    }

    /// Edges with their first co-occurrence year, in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (Edge, i32)> + '_ {
        self.first_year.iter().map(|(e, y)| (*e, *y))
    }

    pub fn first_year(&self, e: Edge) -> Option<i32> {
        self.first_year.get(&e).copied()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.first_year.contains_key(&e)
    }

    pub fn yearly_counts(&self) -> &BTreeMap<i32, BTreeMap<Edge, u32>> {
        &self.yearly_counts
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: i32,
    pub val_end: i32,
    pub test_end: i32,
}

impl SplitSpec {
    pub fn new(train_end: i32, val_end: i32, test_end: i32) -> Result<Self> {
        let s = SplitSpec {
            train_end,
            val_end,
            test_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_end >= self.val_end || self.val_end > self.test_end {
            return Err(Error::InvalidConfig(format!(
                "split requires train_end < val_end <= test_end, got {} / {} / {}",
                self.train_end, self.val_end, self.test_end
            )));
        }
        Ok(())
    }
}

/// Assign every edge to train/val/test by first year. Edges after
/// `test_end` are dropped.
pub fn chronological_split(g: &TemporalGraph, spec: &SplitSpec) -> (Vec<Edge>, Vec<Edge>, Vec<Edge>) {
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (e, y) in g.edges() {
        if y <= spec.train_end {
            train.push(e);
        } else if y <= spec.val_end {
            val.push(e);
        } else if y <= spec.test_end {
            test.push(e);
        }
    }
    (train, val, test)
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

// Above this many candidate pairs, rejection sampling replaces enumeration.
const ENUMERATE_LIMIT: usize = 1 << 21;

/// Draw `count` distinct non-edges uniformly without replacement.
///
/// Candidates exclude every edge of `g` (all periods) and everything in
/// `exclude`. The result is sorted and depends only on the inputs and `seed`.
pub fn sample_negatives(g: &TemporalGraph, count: usize, exclude: &HashSet<Edge>, seed: u64) -> Result<Vec<Edge>> {
    let n = g.n();
    let blocked = g.edge_count() + exclude.iter().filter(|e| !g.contains(**e)).count();
    let available = pair_count(n).saturating_sub(blocked);
    if count > available {
        return Err(Error::InfeasibleSample {
            requested: count,
            available,
        });
    }
    let mut rng = seed::rng(seed);
    let mut out = if pair_count(n) <= ENUMERATE_LIMIT || count * 2 > available {
        let mut cands: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| Edge { u, v }))
            .filter(|e| !g.contains(*e) && !exclude.contains(e))
            .collect();
        let (picked, _) = cands.partial_shuffle(&mut rng, count);
        picked.to_vec()
    } else {
        let mut drawn = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let e = Edge::new(a, b);
            if g.contains(e) || exclude.contains(&e) || !drawn.insert(e) {
                continue;
            }
            out.push(e);
        }
        out
    };
    out.sort_unstable();
    Ok(out)
}

/// Like [`sample_negatives`], restricted to pairs with at least one endpoint
/// in `nodes`.
pub fn sample_negatives_touching(
    g: &TemporalGraph,
    nodes: &[usize],
    count: usize,
    exclude: &HashSet<Edge>,
    seed: u64,
) -> Result<Vec<Edge>> {
    let n = g.n();
    let inside: HashSet<usize> = nodes.iter().copied().collect();
    let mut cands: Vec<Edge> = Vec::new();
    let mut sorted: Vec<usize> = inside.iter().copied().collect();
    sorted.sort_unstable();
    for &a in &sorted {
        for b in 0..n {
            // pairs with both endpoints inside are enumerated once, from the smaller id
            if b == a || (inside.contains(&b) && b < a) {
                continue;
            }
            let e = Edge::new(a, b);
            if !g.contains(e) && !exclude.contains(&e) {
                cands.push(e);
            }
        }
    }
    if count > cands.len() {
        return Err(Error::InfeasibleSample {
            requested: count,
            available: cands.len(),
        });
    }
    cands.sort_unstable();
    let mut rng = seed::rng(seed);
    let (picked, _) = cands.partial_shuffle(&mut rng, count);
    let mut out = picked.to_vec();
    out.sort_unstable();
    Ok(out)
}

/// Nodes with no incident training edge, ascending.
pub fn isolated_nodes(train_pos: &[Edge], n: usize) -> Vec<usize> {
    let mut deg = vec![0usize; n];
    for e in train_pos {
        deg[e.u] += 1;
        deg[e.v] += 1;
    }
    (0..n).filter(|&i| deg[i] == 0).collect()
}

/// Positive and negative edge sets for one chronological split.
///
/// `test_iso_neg` holds negatives for the isolated-node slice: non-edges with
/// at least one endpoint among the training-isolated nodes, one per test
/// positive touching that set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub test_iso_neg: Vec<Edge>,
    pub seed: u64,
}

impl EdgeSplit {
    /// Chronological positives plus 1:1 evaluation negatives.
    pub fn make(g: &TemporalGraph, spec: &SplitSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (train_pos, val_pos, test_pos) = chronological_split(g, spec);
        let mut drawn = HashSet::new();
        let val_neg = sample_negatives(g, val_pos.len(), &drawn, seed::derive(seed, "val_neg", &[]))?;
        drawn.extend(val_neg.iter().copied());
        let test_neg = sample_negatives(g, test_pos.len(), &drawn, seed::derive(seed, "test_neg", &[]))?;
        drawn.extend(test_neg.iter().copied());

        let isolated = isolated_nodes(&train_pos, g.n());
        let iso_set: HashSet<usize> = isolated.iter().copied().collect();
        let iso_pos = test_pos
            .iter()
            .filter(|e| iso_set.contains(&e.u) || iso_set.contains(&e.v))
            .count();
        let test_iso_neg =
            sample_negatives_touching(g, &isolated, iso_pos, &drawn, seed::derive(seed, "test_iso_neg", &[]))?;
        Ok(EdgeSplit {
            train_pos,
            val_pos,
            test_pos,
            val_neg,
            test_neg,
            test_iso_neg,
            seed,
        })
    }

    pub fn isolated_nodes(&self, n: usize) -> Vec<usize> {
        isolated_nodes(&self.train_pos, n)
    }

    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            train: self.train_pos.len(),
            val: self.val_pos.len(),
            test: self.test_pos.len(),
            val_neg: self.val_neg.len(),
            test_neg: self.test_neg.len(),
            test_iso_neg: self.test_iso_neg.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub val_neg: usize,
    pub test_neg: usize,
    pub test_iso_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub spec: SplitSpec,
    pub seed: u64,
    pub nodes: usize,
    pub counts: SplitCounts,
    pub isolated_nodes: usize,
    pub isolated_test_edges: usize,
    pub negatives: String,
}

const SPLIT_FILES: [&str; 6] = [
    "train.tsv",
    "val.tsv",
    "test.tsv",
    "val_neg.tsv",
    "test_neg.tsv",
    "test_iso_neg.tsv",
];

fn write_edges(path: &Path, edges: &[Edge]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = edges
        .iter()
        .try_for_each(|e| writeln!(w, "{}\t{}", e.u, e.v))
        .and_then(|_| w.flush());
    res.map_err(|e| Error::io(path, e))
}

pub fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let parse = |s: Option<&str>| s.and_then(|s| s.trim().parse::<usize>().ok());
        match (parse(f.next()), parse(f.next())) {
            (Some(a), Some(b)) if a != b => out.push(Edge::new(a, b)),
            _ => {
                return Err(Error::Malformed {
                    line: k + 1,
                    msg: format!("expected 'u<TAB>v', got {line:?}"),
                })
            }
        }
    }
    Ok(out)
}

impl EdgeSplit {
    pub fn meta(&self, spec: SplitSpec, n: usize) -> SplitMeta {
        let isolated = self.isolated_nodes(n);
        let iso: HashSet<usize> = isolated.iter().copied().collect();
        SplitMeta {
            spec,
            seed: self.seed,
            nodes: n,
            counts: self.counts(),
            isolated_nodes: isolated.len(),
            isolated_test_edges: self
                .test_pos
                .iter()
                .filter(|e| iso.contains(&e.u) || iso.contains(&e.v))
                .count(),
            negatives:
                "uniform 1:1 over non-edges of all periods; isolated slice restricted to pairs touching isolated nodes"
                    .into(),
        }
    }

    pub fn write_dir(&self, dir: &Path, meta: &SplitMeta) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sets = [
            &self.train_pos,
            &self.val_pos,
            &self.test_pos,
            &self.val_neg,
            &self.test_neg,
            &self.test_iso_neg,
        ];
        for (name, edges) in SPLIT_FILES.iter().zip(sets) {
            write_edges(&dir.join(name), edges)?;
        }
        let meta_path = dir.join("split_meta.json");
        let mut text = serde_json::to_string_pretty(meta)?;
        text.push('\n');
        std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
    }

    pub fn read_dir(dir: &Path) -> Result<(Self, SplitMeta)> {
        let meta_path = dir.join("split_meta.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: SplitMeta = serde_json::from_str(&text)?;
        let mut sets = Vec::with_capacity(SPLIT_FILES.len());
        for name in SPLIT_FILES {
            let p = dir.join(name);
            sets.push(if p.exists() { read_edges(&p)? } else { Vec::new() });
        }
        let mut it = sets.into_iter();
        let mut next = || it.next().unwrap_or_default();
        let split = EdgeSplit {
            train_pos: next(),
            val_pos: next(),
            test_pos: next(),
            val_neg: next(),
            test_neg: next(),
            test_iso_neg: next(),
            seed: meta.seed,
        };
        Ok((split, meta))
    }
}
