use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use anyhow::{Context, Result};
use qclp_core::eval::{self, RunMetrics};
use qclp_core::predict::{self, Graph, TrainOutcome};
use qclp_core::{Arch, EdgeSplit, EmbeddingMatrix, EmbeddingSource, EvalReport, ModelConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::data::SPLIT_FILES;
use super::{hash_with_inputs, read_embedding, require_dir, require_file};
use crate::cli::TrainEvalArgs;
use crate::manifest::{input_checksums, Manifest};
use crate::usage;

pub const METRICS: &str = "metrics.json";
pub const CHECKPOINT: &str = "checkpoint.json";

/// Parse `0,1,2` or the half-open range `0..10`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || {
        usage(format!(
            "--seeds: expected a list like 0,1,2 or a range like 0..10, got {s:?}"
        ))
    };
    let seeds: Vec<u64> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        (lo..hi).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(usage("--seeds: the seed list is empty"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(usage("--seeds: duplicate seeds"));
    }
    Ok(seeds)
}

#[derive(Serialize)]
struct CellMetrics<'a> {
    #[serde(flatten)]
    run: &'a RunMetrics,
    best_epoch: Option<usize>,
    best_val_auroc: Option<f64>,
    epochs_run: usize,
}

struct Feature {
    name: String,
    path: PathBuf,
    matrix: EmbeddingMatrix,
}

fn load_features(specs: &[String], n: usize) -> Result<Vec<Feature>> {
    let mut out: Vec<Feature> = Vec::new();
    for s in specs {
        let (name, path) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("--features: expected name=path, got {s:?}")))?;
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(usage(format!("--features: {name:?} is not usable as a directory name")));
        }
        if out.iter().any(|f| f.name == name) {
            return Err(usage(format!("--features: duplicate name {name:?}")));
        }
        let path = PathBuf::from(path);
        require_file(&path, "--features")?;
        let matrix = read_embedding(&path, EmbeddingSource::Other(name.to_string()))?;
        if matrix.n() != n {
            return Err(usage(format!(
                "--features: {} has {} rows but the split has {n} nodes",
                path.display(),
                matrix.n()
            )));
        }
        out.push(Feature {
            name: name.to_string(),
            path,
            matrix,
        });
    }
    Ok(out)
}

pub fn train_eval(a: &TrainEvalArgs) -> Result<()> {
    require_dir(&a.split, "--split")?;
    let seeds = parse_seeds(&a.seeds)?;
    let archs: Vec<Arch> = a
        .archs
        .iter()
        .map(|s| Arch::from_str(s).map_err(|_| usage(format!("--archs: unknown architecture {s:?}"))))
        .collect::<Result<_>>()?;
    let configs: Vec<ModelConfig> = archs
        .iter()
        .map(|&arch| {
            let c = ModelConfig {
                arch,
                layers: a.layers,
                hidden: a.hidden,
                dropout: a.dropout,
                lr: a.lr,
                epochs: a.epochs,
                patience: a.patience,
                seed: 0,
            };
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let (split, meta) = EdgeSplit::read_dir(&a.split)?;
    if split.test_pos.is_empty() || split.test_neg.is_empty() {
        return Err(usage(format!(
            "--split: {} has no test edges to evaluate",
            a.split.display()
        )));
    }
    let features = load_features(&a.features, meta.nodes)?;
    let g = Graph::new(meta.nodes, &split.train_pos);
    let split_files: Vec<PathBuf> = SPLIT_FILES.iter().map(|f| a.split.join(f)).collect();
    let split_refs: Vec<&Path> = split_files.iter().map(PathBuf::as_path).collect();
    let split_sums = input_checksums(&split_refs)?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let manifest = Mutex::new(Manifest::load(&a.out)?);
    let mut cells: Vec<(&ModelConfig, &Feature, u64)> = Vec::new();
    for c in &configs {
        for f in &features {
            cells.extend(seeds.iter().map(|&s| (c, f, s)));
        }
    }
    log::info!(
        "{} cells: {} archs x {} features x {} seeds",
        cells.len(),
        configs.len(),
        features.len(),
        seeds.len()
    );

    cells.par_iter().try_for_each(|&(cfg, feat, s)| -> Result<()> {
        let cfg = ModelConfig { seed: s, ..cfg.clone() };
        let key = format!("{}/{}/seed_{s}", cfg.arch, feat.name);
        let mut inputs = split_sums.clone();
        inputs.extend(input_checksums(&[&feat.path])?);
        let hash = hash_with_inputs(json!({ "command": "train-eval", "model": cfg }), &inputs);
        if manifest.lock().expect("manifest lock").is_fresh(&a.out, &key, &hash) {
            log::info!("{key}: reusing recorded metrics");
            return Ok(());
        }
        let cell_dir = a.out.join(&key);
        std::fs::create_dir_all(&cell_dir).with_context(|| format!("creating {}", cell_dir.display()))?;
        let (run, outcome) = run_cell(&cfg, feat, &split, &g);
        let mut artifacts = vec![format!("{key}/{METRICS}")];
        let ckpt = cell_dir.join(CHECKPOINT);
        match &outcome {
            Some(o) => {
                std::fs::write(&ckpt, o.params.to_json()?).with_context(|| format!("writing {}", ckpt.display()))?;
                artifacts.push(format!("{key}/{CHECKPOINT}"));
            }
            None => {
                let _ = std::fs::remove_file(&ckpt);
            }
        }
        let cell = CellMetrics {
            run: &run,
            best_epoch: outcome.as_ref().and_then(|o| o.best_epoch),
            best_val_auroc: outcome.as_ref().and_then(|o| o.best_val_auroc),
            epochs_run: outcome.as_ref().map_or(0, |o| o.history.len()),
        };
        let mut text = serde_json::to_string_pretty(&cell)?;
        text.push('\n');
        std::fs::write(cell_dir.join(METRICS), text)?;
        match (&run.auroc, &run.error) {
            (Some(au), _) => log::info!("{key}: test AUROC {au:.4}"),
            (None, Some(e)) => log::warn!("{key}: failed: {e}"),
            _ => {}
        }
        let rels: Vec<&str> = artifacts.iter().map(String::as_str).collect();
        let mut m = manifest.lock().expect("manifest lock");
        m.record(&a.out, &key, "train-eval", &hash, inputs, &rels)?;
        m.save(&a.out)
    })?;

    report(&a.out, &a.out)
}

/// Train and test one cell. Failures are recorded in the metrics, not raised,
/// so the rest of the grid still runs.
fn run_cell(cfg: &ModelConfig, feat: &Feature, split: &EdgeSplit, g: &Graph) -> (RunMetrics, Option<TrainOutcome>) {
    let mut run = RunMetrics {
        arch: cfg.arch.to_string(),
        feature_source: feat.name.clone(),
        seed: cfg.seed,
        auroc: None,
        ap: None,
        slices: BTreeMap::new(),
        error: None,
    };
    let result = predict::train(cfg, &feat.matrix, split, g).and_then(|o| {
        let metrics = predict::test_metrics(&o.params, &feat.matrix, split, g)?;
        Ok((o, metrics))
    });
    match result {
        Ok((o, (global, slices))) => {
            run.auroc = Some(global.auroc);
            run.ap = Some(global.ap);
            run.slices = slices;
            (run, Some(o))
        }
        Err(e) => {
            run.error = Some(e.to_string());
            (run, None)
        }
    }
}

fn collect_runs(run_dir: &Path) -> Result<Vec<RunMetrics>> {
    let mut runs = Vec::new();
    let sorted = |p: &Path| -> Result<Vec<PathBuf>> {
        let mut v: Vec<PathBuf> = std::fs::read_dir(p)
            .with_context(|| format!("reading {}", p.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        v.sort();
        Ok(v)
    };
    for arch in sorted(run_dir)? {
        for feat in sorted(&arch)? {
            for seed in sorted(&feat)? {
                let path = seed.join(METRICS);
                if !path.is_file() {
                    continue;
                }
                let text = std::fs::read_to_string(&path)?;
                let run: RunMetrics =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                runs.push(run);
            }
        }
    }
    Ok(runs)
}

/// Group runs into per-(arch, feature) reports, keeping first-seen feature
/// order stable by sorting on names and seeds.
pub fn group_reports(mut runs: Vec<RunMetrics>) -> Vec<EvalReport> {
    runs.sort_by(|a, b| (&a.feature_source, &a.arch, a.seed).cmp(&(&b.feature_source, &b.arch, b.seed)));
    let mut groups: BTreeMap<(String, String), Vec<RunMetrics>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.feature_source.clone(), r.arch.clone()))
            .or_default()
            .push(r);
    }
    let arch_rank = |a: &str| {
        Arch::from_str(a)
            .ok()
            .and_then(|x| Arch::ALL.iter().position(|&y| y == x))
    };
    let mut reports: Vec<EvalReport> = groups.into_values().map(EvalReport::from_runs).collect();
    reports.sort_by(|a, b| {
        (&a.feature_source, arch_rank(&a.arch), &a.arch).cmp(&(&b.feature_source, arch_rank(&b.arch), &b.arch))
    });
    reports
}

pub fn report(run_dir: &Path, out: &Path) -> Result<()> {
    require_dir(run_dir, "--run")?;
    let runs = collect_runs(run_dir)?;
    if runs.is_empty() {
        return Err(usage(format!("--run: no {METRICS} files under {}", run_dir.display())));
    }
    let reports = group_reports(runs);
    let slices: std::collections::BTreeSet<&String> = reports.iter().flat_map(|r| r.slices.keys()).collect();

    let mut md = String::from(
        "# Test metrics\n\nMean ± sample standard deviation over seeds, in percent. \
         `*` marks a cell with a single successful seed.\n\n",
    );
    md.push_str(&eval::render_markdown(&reports, None));
    for name in &slices {
        md.push_str(&format!("\n## Slice: {name}\n\n"));
        md.push_str(&eval::render_markdown(&reports, Some(name)));
    }
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.failed_seeds.is_empty())
        .map(|r| format!("- {} / {}: seeds {:?}", r.arch, r.feature_source, r.failed_seeds))
        .collect();
    if !failed.is_empty() {
        md.push_str("\n## Failed runs\n\n");
        md.push_str(&failed.join("\n"));
        md.push('\n');
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("report.md"), md)?;
    std::fs::write(out.join("report.csv"), eval::render_csv(&reports, None))?;
    for name in &slices {
        std::fs::write(
            out.join(format!("report_{name}.csv")),
            eval::render_csv(&reports, Some(name)),
        )?;
    }
    log::info!(
        "wrote report for {} (arch, feature) cells to {}",
        reports.len(),
        out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap(), [0, 1, 2]);
        assert_eq!(parse_seeds("4, 2").unwrap(), [4, 2]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("a").is_err());
    }
}
