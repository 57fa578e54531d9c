//! Ranking metrics, seed aggregation and report tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub edge: Edge,
    pub score: f64,
    pub label: bool,
}

impl ScoredEdge {
    pub fn new(u: usize, v: usize, score: f64, label: bool) -> Self {
        Self {
            edge: Edge::new(u, v),
            score,
            label,
        }
    }
}

fn check_finite(scored: &[ScoredEdge]) -> Result<()> {
    if scored.iter().any(|s| !s.score.is_finite()) {
        return Err(Error::InvalidConfig("non-finite score".into()));
    }
    Ok(())
}

/// Rank-based AUROC with midranks for ties (Mann-Whitney U / (m * n)).
pub fn auroc(scored: &[ScoredEdge]) -> Result<f64> {
    check_finite(scored)?;
    let pos = scored.iter().filter(|s| s.label).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| scored[a].score.total_cmp(&scored[b].score));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scored[idx[j + 1]].score == scored[idx[i]].score {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let positives = idx[i..=j].iter().filter(|&&k| scored[k].label).count();
        rank_sum += midrank * positives as f64;
        i = j + 1;
    }
    let m = pos as f64;
    Ok((rank_sum - m * (m + 1.0) / 2.0) / (m * neg as f64))
}

/// Mean of precision@k over the ranks `k` of the positives. Ranking is by
/// descending score, ties broken by ascending `(u, v)`.
pub fn average_precision(scored: &[ScoredEdge]) -> Result<f64> {
    check_finite(scored)?;
    let mut order: Vec<&ScoredEdge> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.edge.cmp(&b.edge))
    });
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, s) in order.iter().enumerate() {
        if s.label {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::EmptyInput(
            "average precision needs at least one positive".into(),
        ));
    }
    Ok(sum / hits as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub ap: f64,
}

impl Metrics {
    pub fn compute(scored: &[ScoredEdge]) -> Result<Self> {
        Ok(Self {
            auroc: auroc(scored)?,
            ap: average_precision(scored)?,
        })
    }
}

/// Metrics restricted to edges with at least one endpoint in `nodes`.
pub fn slice_eval(scored: &[ScoredEdge], nodes: &[usize]) -> Result<Metrics> {
    let set: HashSet<usize> = nodes.iter().copied().collect();
    let sliced: Vec<ScoredEdge> = scored
        .iter()
        .filter(|s| set.contains(&s.edge.u) || set.contains(&s.edge.v))
        .copied()
        .collect();
    if sliced.is_empty() {
        return Err(Error::EmptyInput("no scored edge touches the slice".into()));
    }
    Metrics::compute(&sliced)
}

/// Mean and sample (n-1) standard deviation. With one value the deviation
/// is undefined; it is reported as 0 and `std_defined` is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub std_defined: bool,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count,
                std_defined: false,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        if count == 1 {
            return Self {
                mean,
                std: 0.0,
                count,
                std_defined: false,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        Self {
            mean,
            std: var.sqrt(),
            count,
            std_defined: true,
        }
    }

    /// Percent with two decimals, e.g. `89.63 ± 0.05`. A trailing `*` marks
    /// an undefined deviation.
    pub fn cell(&self) -> String {
        let mut s = format!("{:.2} ± {:.2}", 100.0 * self.mean, 100.0 * self.std);
        if !self.std_defined {
            s.push('*');
        }
        s
    }
}

/// Result of one (arch, feature source, seed) training run; written as
/// `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub arch: String,
    pub feature_source: String,
    pub seed: u64,
    pub auroc: Option<f64>,
    pub ap: Option<f64>,
    #[serde(default)]
    pub slices: BTreeMap<String, Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregate over seeds for one (arch, feature source) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub arch: String,
    pub feature_source: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunMetrics>,
    pub auroc: Summary,
    pub ap: Summary,
    pub slices: BTreeMap<String, (Summary, Summary)>,
    pub failed_seeds: Vec<u64>,
}

impl EvalReport {
    /// Aggregate runs that share one arch and feature source. Failed runs are
    /// listed but excluded from the statistics.
    pub fn from_runs(runs: Vec<RunMetrics>) -> Self {
        let arch = runs.first().map(|r| r.arch.clone()).unwrap_or_default();
        let feature_source = runs.first().map(|r| r.feature_source.clone()).unwrap_or_default();
        let ok: Vec<&RunMetrics> = runs.iter().filter(|r| r.auroc.is_some() && r.ap.is_some()).collect();
        let auroc = Summary::of(&ok.iter().filter_map(|r| r.auroc).collect::<Vec<_>>());
        let ap = Summary::of(&ok.iter().filter_map(|r| r.ap).collect::<Vec<_>>());
        let names: BTreeSet<&String> = ok.iter().flat_map(|r| r.slices.keys()).collect();
        let slices = names
            .into_iter()
            .map(|name| {
                let ms: Vec<Metrics> = ok.iter().filter_map(|r| r.slices.get(name)).copied().collect();
                let a = Summary::of(&ms.iter().map(|m| m.auroc).collect::<Vec<_>>());
                let p = Summary::of(&ms.iter().map(|m| m.ap).collect::<Vec<_>>());
                (name.clone(), (a, p))
            })
            .collect();
        Self {
            seeds: runs.iter().map(|r| r.seed).collect(),
            failed_seeds: runs.iter().filter(|r| r.error.is_some()).map(|r| r.seed).collect(),
            arch,
            feature_source,
            runs,
            auroc,
            ap,
            slices,
        }
    }
}

fn table_axes(reports: &[EvalReport]) -> (Vec<String>, Vec<String>) {
    let mut features = Vec::new();
    let mut archs = Vec::new();
    for r in reports {
        if !features.contains(&r.feature_source) {
            features.push(r.feature_source.clone());
        }
        if !archs.contains(&r.arch) {
            archs.push(r.arch.clone());
        }
    }
    (features, archs)
}

fn pick(reports: &[EvalReport], feature: &str, arch: &str, slice: Option<&str>) -> Option<(Summary, Summary)> {
    let r = reports.iter().find(|r| r.feature_source == feature && r.arch == arch)?;
    match slice {
        None => Some((r.auroc, r.ap)),
        Some(name) => r.slices.get(name).copied(),
    }
}

/// Markdown table: rows are feature sources, each model contributes an
/// AUROC and an AP column. `slice = None` renders the global metrics.
pub fn render_markdown(reports: &[EvalReport], slice: Option<&str>) -> String {
    let (features, archs) = table_axes(reports);
    let mut out = String::new();
    out.push_str("| Node Embedding |");
    for a in &archs {
        let _ = write!(out, " {a} AUROC | {a} AP |");
    }
    out.push_str("\n|---|");
    for _ in &archs {
        out.push_str("---|---|");
    }
    out.push('\n');
    for f in &features {
        let _ = write!(out, "| {f} |");
        for a in &archs {
            match pick(reports, f, a, slice) {
                Some((au, ap)) => {
                    let _ = write!(out, " {} | {} |", au.cell(), ap.cell());
                }
                None => out.push_str(" - | - |"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_csv(reports: &[EvalReport], slice: Option<&str>) -> String {
    let (features, archs) = table_axes(reports);
    let mut out = String::from("feature_source");
    for a in &archs {
        let _ = write!(out, ",{a}_auroc,{a}_ap");
    }
    out.push('\n');
    for f in &features {
        out.push_str(f);
        for a in &archs {
            match pick(reports, f, a, slice) {
                Some((au, ap)) => {
                    let _ = write!(out, ",{},{}", au.cell(), ap.cell());
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(pos: &[f64], neg: &[f64]) -> Vec<ScoredEdge> {
        let mut out = Vec::new();
        for (i, &s) in pos.iter().enumerate() {
            out.push(ScoredEdge::new(2 * i, 2 * i + 1, s, true));
        }
        for (i, &s) in neg.iter().enumerate() {
            out.push(ScoredEdge::new(1000 + 2 * i, 1001 + 2 * i, s, false));
        }
        out
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&scored(&[0.9, 0.4], &[0.5, 0.1])).unwrap(), 0.75);
        assert_eq!(auroc(&scored(&[0.9, 0.8], &[0.1, 0.2])).unwrap(), 1.0);
        assert_eq!(auroc(&scored(&[0.3, 0.3], &[0.3, 0.3, 0.3])).unwrap(), 0.5);
        assert!(matches!(auroc(&scored(&[0.3], &[])), Err(Error::SingleClass)));
    }

    #[test]
    fn ap_examples() {
        // ranked labels [1, 0, 1, 0]
        let s = vec![
            ScoredEdge::new(0, 1, 0.9, true),
            ScoredEdge::new(0, 2, 0.8, false),
            ScoredEdge::new(0, 3, 0.7, true),
            ScoredEdge::new(0, 4, 0.6, false),
        ];
        assert!((average_precision(&s).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&scored(&[0.9, 0.8], &[0.1, 0.2])).unwrap(), 1.0);
        assert_eq!(
            average_precision(&scored(&[0.0], &[0.5, 0.4, 0.3, 0.2])).unwrap(),
            1.0 / 5.0
        );
        assert!(average_precision(&scored(&[], &[0.5])).is_err());
    }

    #[test]
    fn ap_ties_break_by_edge() {
        let s = vec![ScoredEdge::new(0, 2, 0.5, true), ScoredEdge::new(0, 1, 0.5, false)];
        assert_eq!(average_precision(&s).unwrap(), 0.5);
    }

    #[test]
    fn summary_formatting() {
        let s = Summary::of(&[0.8963, 0.8963, 0.8963]);
        assert_eq!(s.cell(), "89.63 ± 0.00");
        let one = Summary::of(&[0.5]);
        assert!(!one.std_defined);
        assert_eq!(one.cell(), "50.00 ± 0.00*");
        let s = Summary {
            mean: 0.8963,
            std: 0.0005,
            count: 10,
            std_defined: true,
        };
        assert_eq!(s.cell(), "89.63 ± 0.05");
    }

    #[test]
    fn slices() {
        let s = vec![
            ScoredEdge::new(0, 1, 0.9, true),
            ScoredEdge::new(2, 3, 0.2, true),
            ScoredEdge::new(0, 4, 0.4, false),
            ScoredEdge::new(3, 5, 0.1, false),
        ];
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(slice_eval(&s, &all).unwrap(), Metrics::compute(&s).unwrap());
        assert!(slice_eval(&s, &[9]).is_err());
        let m = slice_eval(&s, &[3]).unwrap();
        assert_eq!(m.auroc, 1.0);
    }

    #[test]
    fn report_tables() {
        let run = |arch: &str, f: &str, seed, a| RunMetrics {
            arch: arch.into(),
            feature_source: f.into(),
            seed,
            auroc: Some(a),
            ap: Some(a),
            slices: BTreeMap::from([("isolated".to_string(), Metrics { auroc: 0.5, ap: 0.5 })]),
            error: None,
        };
        let reports = vec![
            EvalReport::from_runs(vec![run("gcn", "gemini", 0, 0.9), run("gcn", "gemini", 1, 0.9)]),
            EvalReport::from_runs(vec![run("mlp", "gemini", 0, 0.8), run("mlp", "gemini", 1, 0.8)]),
            EvalReport::from_runs(vec![run("gcn", "deepwalk", 0, 0.7), run("gcn", "deepwalk", 1, 0.7)]),
        ];
        let md = render_markdown(&reports, None);
        assert!(md.contains("| gemini | 90.00 ± 0.00 | 90.00 ± 0.00 | 80.00 ± 0.00 | 80.00 ± 0.00 |"));
        assert!(md.contains("| deepwalk | 70.00 ± 0.00 | 70.00 ± 0.00 | - | - |"));
        let iso = render_markdown(&reports, Some("isolated"));
        assert!(!iso.contains("90.00"));
        let csv = render_csv(&reports, None);
        assert!(csv.starts_with("feature_source,gcn_auroc,gcn_ap,mlp_auroc,mlp_ap\n"));
    }
}
