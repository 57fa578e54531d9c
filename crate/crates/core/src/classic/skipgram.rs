use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;

use super::{log_sigmoid, sigmoid};
use crate::embedding::{EmbeddingMatrix, EmbeddingSource};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub neg_k: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to `lr * 1e-4` over training.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 768,
            window: 10,
            neg_k: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be >= 1".into()));
        }
        if self.window == 0 || self.neg_k == 0 {
            return Err(Error::InvalidConfig("window and neg_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Skip-gram with negative sampling over node sequences.
///
/// Center vectors start as uniform noise in `±0.5/dim`, context vectors at
/// zero. Negatives are drawn from a noise distribution proportional to
/// `degree^0.75`.
pub struct SkipGram {
    n: usize,
    dim: usize,
    center: Vec<f64>,
    context: Vec<f64>,
    noise_probs: Vec<f64>,
    noise: Option<WeightedIndex<f64>>,
    cfg: SkipGramConfig,
}

impl SkipGram {
    pub fn new(degrees: &[usize], cfg: SkipGramConfig) -> Result<Self> {
        cfg.validate()?;
        let n = degrees.len();
        let dim = cfg.dim;
        let mut rng = seed::rng(seed::derive(cfg.seed, "skipgram_init", &[]));
        let half = 0.5 / dim as f64;
        let center = (0..n * dim).map(|_| rng.random_range(-half..half)).collect();
        let weights: Vec<f64> = degrees.iter().map(|&d| (d as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        let noise_probs = weights
            .iter()
            .map(|w| if total > 0.0 { w / total } else { 0.0 })
            .collect();
        let noise = if total > 0.0 {
            WeightedIndex::new(&weights).ok()
        } else {
            None
        };
        Ok(Self {
            n,
            dim,
            center,
            context: vec![0.0; n * dim],
            noise_probs,
            noise,
            cfg,
        })
    }

    fn for_each_pair(walks: &[Vec<usize>], window: usize, mut f: impl FnMut(usize, usize)) {
        for w in walks {
            for (i, &c) in w.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window + 1).min(w.len());
                for (j, &o) in w.iter().enumerate().take(hi).skip(lo) {
                    if j != i {
                        f(c, o);
                    }
                }
            }
        }
    }

    pub fn pair_count(walks: &[Vec<usize>], window: usize) -> usize {
        let mut k = 0;
        Self::for_each_pair(walks, window, |_, _| k += 1);
        k
    }

    fn dot(&self, c: usize, o: usize) -> f64 {
        let (a, b) = (
            &self.center[c * self.dim..][..self.dim],
            &self.context[o * self.dim..][..self.dim],
        );
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// One SGD step on the pair `(c, o)` with the given negatives.
    fn update(&mut self, c: usize, o: usize, negs: &[usize], lr: f64, grad: &mut [f64]) {
        let d = self.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (k, &t) in std::iter::once(&o).chain(negs).enumerate() {
            let label = if k == 0 { 1.0 } else { 0.0 };
            let g = lr * (label - sigmoid(self.dot(c, t)));
            let (cv, tv) = (c * d, t * d);
            for i in 0..d {
                grad[i] += g * self.context[tv + i];
                self.context[tv + i] += g * self.center[cv + i];
            }
        }
        for i in 0..d {
            self.center[c * d + i] += grad[i];
        }
    }

    /// Run one pass over all (center, context) pairs, decaying the learning
    /// rate linearly from `lr_from` to `lr_to`.
    pub fn train_epoch(&mut self, walks: &[Vec<usize>], lr_from: f64, lr_to: f64, rng: &mut seed::Rng) {
        let Some(noise) = self.noise.clone() else {
            return;
        };
        let total = Self::pair_count(walks, self.cfg.window).max(1);
        let mut grad = vec![0.0; self.dim];
        let mut negs = vec![0usize; self.cfg.neg_k];
        let mut step = 0usize;
        Self::for_each_pair(walks, self.cfg.window, |c, o| {
            let lr = lr_from + (lr_to - lr_from) * (step as f64 / total as f64);
            for x in negs.iter_mut() {
                *x = noise.sample(rng);
            }
            self.update(c, o, &negs, lr, &mut grad);
            step += 1;
        });
    }

    /// Negative-sampling objective evaluated exactly: the negative term uses
    /// the expectation `neg_k * E_noise[ln σ(-u·v)]` instead of samples.
    pub fn objective(&self, walks: &[Vec<usize>]) -> f64 {
        let mut per_center = vec![0usize; self.n];
        let mut pos = 0.0;
        Self::for_each_pair(walks, self.cfg.window, |c, o| {
            pos += log_sigmoid(self.dot(c, o));
            per_center[c] += 1;
        });
        let mut neg = 0.0;
        for (c, &count) in per_center.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let expect: f64 = self
                .noise_probs
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(t, p)| p * log_sigmoid(-self.dot(c, t)))
                .sum();
            neg += count as f64 * self.cfg.neg_k as f64 * expect;
        }
        pos + neg
    }

    pub fn embedding(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            self.n,
            self.dim,
            self.center.clone(),
            EmbeddingSource::Other("skipgram".into()),
        )
        .expect("center buffer has n*dim entries")
    }
}

/// Train skip-gram embeddings; `degrees[i]` is node `i`'s degree and the
/// output has `degrees.len()` rows.
pub fn train_skipgram(walks: &[Vec<usize>], degrees: &[usize], cfg: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if walks.is_empty() {
        return Err(Error::EmptyInput("no walks to train on".into()));
    }
    let mut model = SkipGram::new(degrees, *cfg)?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "skipgram_train", &[]));
    let lr_min = cfg.lr * 1e-4;
    for epoch in 0..cfg.epochs {
        let from = cfg.lr - (cfg.lr - lr_min) * epoch as f64 / cfg.epochs as f64;
        let to = cfg.lr - (cfg.lr - lr_min) * (epoch + 1) as f64 / cfg.epochs as f64;
        model.train_epoch(walks, from, to, &mut rng);
    }
    Ok(model.embedding())
}
