use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::sigmoid;
use crate::embedding::{EmbeddingMatrix, EmbeddingSource};
use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineConfig {
    /// Total output dimension; split evenly between first- and second-order halves.
    pub dim: usize,
    pub neg_k: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            dim: 768,
            neg_k: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
        }
    }
}

struct Half {
    d: usize,
    vecs: Vec<f64>,
}

impl Half {
    fn dot(&self, a: usize, other: &[f64], b: usize) -> f64 {
        let d = self.d;
        self.vecs[a * d..(a + 1) * d]
            .iter()
            .zip(&other[b * d..(b + 1) * d])
            .map(|(x, y)| x * y)
            .sum()
    }
}

/// LINE with first- and second-order proximity, trained by plain SGD with
/// negative sampling over both directions of every edge.
///
/// The output row for node `i` is `[first_order_i | second_order_i]`.
pub fn train_line(adj: &Adjacency, cfg: &LineConfig) -> Result<EmbeddingMatrix> {
    if cfg.dim == 0 || cfg.dim % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "LINE needs an even positive dim, got {}",
            cfg.dim
        )));
    }
    if cfg.neg_k == 0 {
        return Err(Error::InvalidConfig("neg_k must be >= 1".into()));
    }
    let n = adj.n();
    let d = cfg.dim / 2;
    let mut rng = seed::rng(seed::derive(cfg.seed, "line_init", &[]));
    let half = 0.5 / d as f64;
    let mut init = || -> Vec<f64> { (0..n * d).map(|_| rng.random_range(-half..half)).collect() };
    let mut first = Half { d, vecs: init() };
    let mut second = Half { d, vecs: init() };
    let mut context = vec![0.0; n * d];

    let mut arcs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| adj.neighbors(u).iter().map(move |&v| (u, v)))
        .collect();
    let degrees = adj.degrees();
    let weights: Vec<f64> = degrees.iter().map(|&k| (k as f64).powf(0.75)).collect();
    if arcs.is_empty() {
        return Ok(assemble(n, d, &first.vecs, &second.vecs));
    }
    let noise = WeightedIndex::new(&weights).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut rng = seed::rng(seed::derive(cfg.seed, "line_train", &[]));
    let total = (cfg.epochs * arcs.len()).max(1) as f64;
    let lr_min = cfg.lr * 1e-4;
    let mut step = 0usize;
    let mut grad = vec![0.0; d];
    let mut negs = vec![0usize; cfg.neg_k];
    for _ in 0..cfg.epochs {
        arcs.shuffle(&mut rng);
        for &(i, j) in &arcs {
            let lr = cfg.lr - (cfg.lr - lr_min) * step as f64 / total;
            step += 1;
            for x in negs.iter_mut() {
                *x = noise.sample(&mut rng);
            }

            // first order: both sides are vertex vectors
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (k, &t) in std::iter::once(&j).chain(&negs).enumerate() {
                if t == i || (k > 0 && t == j) {
                    continue;
                }
                let label = if k == 0 { 1.0 } else { 0.0 };
                let g = lr * (label - sigmoid(first.dot(i, &first.vecs, t)));
                for a in 0..d {
                    grad[a] += g * first.vecs[t * d + a];
                    first.vecs[t * d + a] += g * first.vecs[i * d + a];
                }
            }
            for a in 0..d {
                first.vecs[i * d + a] += grad[a];
            }

            // second order: vertex vector against context vectors
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (k, &t) in std::iter::once(&j).chain(&negs).enumerate() {
                if k > 0 && t == j {
                    continue;
                }
                let label = if k == 0 { 1.0 } else { 0.0 };
                let g = lr * (label - sigmoid(second.dot(i, &context, t)));
                for a in 0..d {
                    grad[a] += g * context[t * d + a];
                    context[t * d + a] += g * second.vecs[i * d + a];
                }
            }
            for a in 0..d {
                second.vecs[i * d + a] += grad[a];
            }
        }
    }
    Ok(assemble(n, d, &first.vecs, &second.vecs))
}

fn assemble(n: usize, d: usize, first: &[f64], second: &[f64]) -> EmbeddingMatrix {
    let mut data = Vec::with_capacity(n * 2 * d);
    for i in 0..n {
        data.extend_from_slice(&first[i * d..(i + 1) * d]);
        data.extend_from_slice(&second[i * d..(i + 1) * d]);
    }
    EmbeddingMatrix::new(n, 2 * d, data, EmbeddingSource::Line).expect("sizes agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn cfg(epochs: usize) -> LineConfig {
        LineConfig {
            dim: 8,
            neg_k: 1,
            epochs,
            lr: 0.1,
            seed: 3,
        }
    }

    #[test]
    fn odd_dim_rejected() {
        let adj = Adjacency::from_edges(2, &[Edge::new(0, 1)]);
        assert!(train_line(&adj, &LineConfig { dim: 7, ..cfg(1) }).is_err());
    }

    #[test]
    fn edgeless_keeps_initialization() {
        let adj = Adjacency::from_edges(4, &[]);
        let a = train_line(&adj, &cfg(0)).unwrap();
        let b = train_line(&adj, &cfg(10)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.dim()), (4, 8));
    }

    #[test]
    fn k2_first_order_inner_product_grows() {
        let adj = Adjacency::from_edges(2, &[Edge::new(0, 1)]);
        let ip = |epochs| {
            let e = train_line(&adj, &cfg(epochs)).unwrap();
            e.row(0)[..4]
                .iter()
                .zip(&e.row(1)[..4])
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let series: Vec<f64> = [0, 2, 10, 40].iter().map(|&k| ip(k)).collect();
        assert!(series.windows(2).all(|w| w[1] > w[0]), "{series:?}");
    }

    #[test]
    fn deterministic() {
        let edges: Vec<Edge> = (0..6).map(|i| Edge::new(i, (i + 1) % 6)).collect();
        let adj = Adjacency::from_edges(7, &edges);
        let a = train_line(&adj, &cfg(3)).unwrap();
        assert_eq!(a, train_line(&adj, &cfg(3)).unwrap());
        assert!(a.is_finite());
    }
}
