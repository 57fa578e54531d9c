//! Connectivity-based baseline embedders: DeepWalk, node2vec and LINE.
//!
//! All three run on the training view of the graph. Nodes without training
//! edges keep their seeded initialization vector.

mod line;
mod skipgram;
mod walks;

pub use line::{train_line, LineConfig};
pub use skipgram::{train_skipgram, SkipGram, SkipGramConfig};
pub use walks::{biased_walks, random_walks, transition_probs, WalkConfig};

use crate::embedding::{EmbeddingMatrix, EmbeddingSource};
use crate::error::Result;
use crate::graph::Adjacency;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`, stable for large `|x|`.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn deepwalk(adj: &Adjacency, walk: &WalkConfig, sg: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    let walks = random_walks(adj, walk)?;
    let mut emb = train_skipgram(&walks, &adj.degrees(), sg)?;
    emb.source = EmbeddingSource::DeepWalk;
    Ok(emb)
}

pub fn node2vec(adj: &Adjacency, walk: &WalkConfig, sg: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    let walks = biased_walks(adj, walk)?;
    let mut emb = train_skipgram(&walks, &adj.degrees(), sg)?;
    emb.source = EmbeddingSource::Node2Vec;
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sigmoid_matches_direct() {
        for x in [-30.0, -2.0, -0.1, 0.0, 0.3, 5.0, 40.0] {
            let direct = sigmoid(x).ln();
            assert!((log_sigmoid(x) - direct).abs() < 1e-12, "{x}");
        }
        assert!(log_sigmoid(-800.0).is_finite());
    }
}
