use ndarray::Array2;
use rand::Rng as _;

use super::model::{Act, Graph, ModelParams};
use super::ModelConfig;
use crate::error::Result;
use crate::graph::Edge;
use crate::seed;

/// A small random problem for comparing analytic and numeric gradients.
pub struct GradCheckInstance {
    pub features: Array2<f64>,
    pub graph: Graph,
    pub batch: Vec<(Edge, f64)>,
}

impl GradCheckInstance {
    /// `n` nodes with `d` standard-normal-ish features, edges with
    /// probability 0.3, and a batch of up to 8 positives and 8 negatives.
    pub fn random(seed: u64, n: usize, d: usize) -> Self {
        let mut rng = seed::rng(seed::derive(seed, "gradcheck", &[]));
        let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let mut edges = Vec::new();
        let mut non_edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.3 {
                    edges.push(Edge::new(u, v));
                } else {
                    non_edges.push(Edge::new(u, v));
                }
            }
        }
        let graph = Graph::new(n, &edges);
        let mut batch: Vec<(Edge, f64)> = edges.iter().take(8).map(|e| (*e, 1.0)).collect();
        batch.extend(non_edges.iter().rev().take(8).map(|e| (*e, 0.0)));
        Self { features, graph, batch }
    }
}

/// Maximum relative error between analytic gradients and central finite
/// differences (`h = 1e-5`) over every parameter. The relative error is
/// `|a - f| / max(|a|, |f|, 1e-8)`, so exactly-zero directions (dead ReLU
/// units) contribute nothing.
pub fn gradient_check(config: &ModelConfig, inst: &GradCheckInstance) -> Result<f64> {
    let mut params = ModelParams::init(config, inst.features.ncols())?;
    // non-zero biases so their gradients are exercised away from the origin
    let mut rng = seed::rng(seed::derive(config.seed, "gradcheck_bias", &[]));
    for l in 0..params.tensors.len() {
        if l % 2 == 1 {
            params.tensors[l].mapv_inplace(|_| rng.random_range(-0.1..0.1));
        }
    }
    let (_, analytic) = params.loss_and_grads(&inst.graph, &inst.features, &inst.batch, None, Act::Relu)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for t in 0..params.tensors.len() {
        for idx in 0..params.tensors[t].len() {
            let orig = params.tensors[t].as_slice().expect("standard layout")[idx];
            params.tensors[t].as_slice_mut().expect("standard layout")[idx] = orig + h;
            let (lp, _) = params.loss_and_grads(&inst.graph, &inst.features, &inst.batch, None, Act::Relu)?;
            params.tensors[t].as_slice_mut().expect("standard layout")[idx] = orig - h;
            let (lm, _) = params.loss_and_grads(&inst.graph, &inst.features, &inst.batch, None, Act::Relu)?;
            params.tensors[t].as_slice_mut().expect("standard layout")[idx] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[t].as_slice().expect("standard layout")[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
