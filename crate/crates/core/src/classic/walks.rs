use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub num_walks: usize,
    pub walk_len: usize,
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving away from the previous node.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            num_walks: 10,
            walk_len: 80,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_walks < 1 || self.walk_len < 2 {
            return Err(Error::InvalidConfig(
                "walks need num_walks >= 1 and walk_len >= 2".into(),
            ));
        }
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::InvalidConfig("node2vec p and q must be positive".into()));
        }
        Ok(())
    }
}

/// Uniform random walks: `num_walks` rounds, each starting one walk at every
/// node in id order. Degree-0 nodes produce the singleton walk `[node]`.
pub fn random_walks(adj: &Adjacency, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    Ok(generate(adj, cfg, |rng, _prev, cur| {
        let nb = adj.neighbors(cur);
        nb[rng.random_range(0..nb.len())]
    }))
}

/// node2vec second-order walks. From `cur`, having arrived from `prev`, the
/// unnormalized weight of neighbor `x` is `1/p` if `x == prev`, `1` if `x`
/// is adjacent to `prev`, and `1/q` otherwise. The first step is uniform.
///
/// Sampling is by rejection against the maximum weight, which draws exactly
/// from the normalized distribution without per-edge alias tables.
pub fn biased_walks(adj: &Adjacency, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let (wp, wq) = (1.0 / cfg.p, 1.0 / cfg.q);
    let wmax = wp.max(wq).max(1.0);
    Ok(generate(adj, cfg, |rng, prev, cur| {
        let nb = adj.neighbors(cur);
        let Some(prev) = prev else {
            return nb[rng.random_range(0..nb.len())];
        };
        loop {
            let x = nb[rng.random_range(0..nb.len())];
            let w = if x == prev {
                wp
            } else if adj.has_edge(prev, x) {
                1.0
            } else {
                wq
            };
            if w >= wmax || rng.random::<f64>() * wmax < w {
                return x;
            }
        }
    }))
}

/// Normalized node2vec transition distribution out of `cur` given `prev`.
pub fn transition_probs(adj: &Adjacency, prev: usize, cur: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    let weights: Vec<(usize, f64)> = adj
        .neighbors(cur)
        .iter()
        .map(|&x| {
            let w = if x == prev {
                1.0 / p
            } else if adj.has_edge(prev, x) {
                1.0
            } else {
                1.0 / q
            };
            (x, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(x, w)| (x, w / total)).collect()
}

fn generate<F>(adj: &Adjacency, cfg: &WalkConfig, step: F) -> Vec<Vec<usize>>
where
    F: Fn(&mut seed::Rng, Option<usize>, usize) -> usize + Sync,
{
    let n = adj.n();
    (0..cfg.num_walks * n)
        .into_par_iter()
        .map(|k| {
            let (round, start) = (k / n, k % n);
            if adj.degree(start) == 0 {
                return vec![start];
            }
            let mut rng = seed::rng(seed::mix(cfg.seed, start as u64, round as u64));
            let mut walk = Vec::with_capacity(cfg.walk_len);
            walk.push(start);
            let mut prev = None;
            while walk.len() < cfg.walk_len {
                let cur = *walk.last().unwrap();
                let next = step(&mut rng, prev, cur);
                prev = Some(cur);
                walk.push(next);
            }
            walk
        })
        .collect()
}
