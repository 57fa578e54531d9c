use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Act, Graph, ModelParams};
use super::ModelConfig;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, Metrics, RunMetrics, ScoredEdge};
use crate::graph::{Edge, EdgeSplit};
use crate::seed;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(params: &ModelParams, lr: f64) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &[Array2<f64>]) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .tensors
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_auroc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUROC (or the last
    /// epoch when there is no validation set).
    pub params: ModelParams,
    pub best_epoch: Option<usize>,
    pub best_val_auroc: Option<f64>,
    pub history: Vec<EpochLog>,
}

/// Uniform random node pairs that are not training edges; duplicates allowed.
fn train_negatives(g: &Graph, count: usize, rng: &mut seed::Rng) -> Vec<Edge> {
    let n = g.n();
    let mut out = Vec::with_capacity(count);
    if n < 2 {
        return out;
    }
    let mut attempts = 0usize;
    while out.len() < count && attempts < count.saturating_mul(100) + 1000 {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || g.adj.has_edge(a, b) {
            continue;
        }
        out.push(Edge::new(a, b));
    }
    out
}

pub fn score_edges(params: &ModelParams, g: &Graph, h: &Array2<f64>, pos: &[Edge], neg: &[Edge]) -> Vec<ScoredEdge> {
    let pos_scores = params.score_with(g, h, pos);
    let neg_scores = params.score_with(g, h, neg);
    pos.iter()
        .zip(pos_scores)
        .map(|(e, s)| ScoredEdge {
            edge: *e,
            score: s,
            label: true,
        })
        .chain(neg.iter().zip(neg_scores).map(|(e, s)| ScoredEdge {
            edge: *e,
            score: s,
            label: false,
        }))
        .collect()
}

/// Full-batch training with Adam on mean BCE over the training positives
/// and an equal number of fresh negatives per epoch. Early stopping watches
/// validation AUROC.
pub fn train(config: &ModelConfig, features: &EmbeddingMatrix, split: &EdgeSplit, g: &Graph) -> Result<TrainOutcome> {
    let x = features.to_array();
    let mut params = ModelParams::init(config, features.dim())?;
    let mut adam = Adam::new(&params, config.lr);
    let mut rng = seed::rng(seed::derive(config.seed, "train", &[]));
    let has_val = !split.val_pos.is_empty() && !split.val_neg.is_empty();

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0usize;
    let mut history = Vec::new();

    for epoch in 0..config.epochs {
        let negs = train_negatives(g, split.train_pos.len(), &mut rng);
        let batch: Vec<(Edge, f64)> = split
            .train_pos
            .iter()
            .map(|e| (*e, 1.0))
            .chain(negs.into_iter().map(|e| (e, 0.0)))
            .collect();
        if batch.is_empty() {
            break;
        }
        let (loss, grads) = params.loss_and_grads(g, &x, &batch, Some(&mut rng), Act::Relu)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        adam.step(&mut params, &grads);
        if !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }

        let val_auroc = if has_val {
            let h = params.encode(g, &x)?;
            Some(eval::auroc(&score_edges(
                &params,
                g,
                &h,
                &split.val_pos,
                &split.val_neg,
            ))?)
        } else {
            None
        };
        history.push(EpochLog { epoch, loss, val_auroc });

        if let Some(v) = val_auroc {
            if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                best = Some((v, epoch, params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    log::debug!("early stop at epoch {epoch}, best {:?}", best.as_ref().map(|b| b.1));
                    break;
                }
            }
        }
    }

    Ok(match best {
        Some((v, epoch, p)) => TrainOutcome {
            params: p,
            best_epoch: Some(epoch),
            best_val_auroc: Some(v),
            history,
        },
        None => TrainOutcome {
            best_epoch: history.last().map(|h| h.epoch),
            params,
            best_val_auroc: None,
            history,
        },
    })
}

/// Metrics of trained `params` on the test split, plus the isolated-node
/// slice when the split has slice negatives.
pub fn test_metrics(
    params: &ModelParams,
    features: &EmbeddingMatrix,
    split: &EdgeSplit,
    g: &Graph,
) -> Result<(Metrics, BTreeMap<String, Metrics>)> {
    let h = params.encode(g, &features.to_array())?;
    let scored = score_edges(params, g, &h, &split.test_pos, &split.test_neg);
    let global = Metrics::compute(&scored)?;
    let mut slices = BTreeMap::new();
    let isolated = split.isolated_nodes(g.n());
    if !isolated.is_empty() && !split.test_iso_neg.is_empty() {
        let iso: HashSet<usize> = isolated.iter().copied().collect();
        let pos: Vec<Edge> = split
            .test_pos
            .iter()
            .filter(|e| iso.contains(&e.u) || iso.contains(&e.v))
            .copied()
            .collect();
        let slice_scored = score_edges(params, g, &h, &pos, &split.test_iso_neg);
        slices.insert("isolated".to_string(), eval::slice_eval(&slice_scored, &isolated)?);
    }
    Ok((global, slices))
}

/// Train once per seed and aggregate test metrics. Seeds run in parallel;
/// each run is deterministic on its own.
pub fn evaluate(
    config: &ModelConfig,
    feature_source: &str,
    features: &EmbeddingMatrix,
    split: &EdgeSplit,
    g: &Graph,
    seeds: &[u64],
) -> EvalReport {
    let runs: Vec<RunMetrics> = seeds
        .par_iter()
        .map(|&s| {
            let cfg = ModelConfig {
                seed: s,
                ..config.clone()
            };
            let res = train(&cfg, features, split, g).and_then(|o| test_metrics(&o.params, features, split, g));
            match res {
                Ok((m, slices)) => RunMetrics {
                    arch: config.arch.to_string(),
                    feature_source: feature_source.to_string(),
                    seed: s,
                    auroc: Some(m.auroc),
                    ap: Some(m.ap),
                    slices,
                    error: None,
                },
                Err(e) => RunMetrics {
                    arch: config.arch.to_string(),
                    feature_source: feature_source.to_string(),
                    seed: s,
                    auroc: None,
                    ap: None,
                    slices: BTreeMap::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    EvalReport::from_runs(runs)
}
