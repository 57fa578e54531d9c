//! LLM-generated concept features.
//!
//! A generator model answers a fixed question about each concept, an
//! embedding model turns the answer into a vector, and both calls go through
//! an on-disk cache keyed by SHA-256 of model id and input. In fixture mode
//! the cache is the only source: a miss is an error and no request is made.

mod cache;
mod client;
mod merge;
mod transport;

pub use cache::{cache_key, Cache, CacheEntry, EntryKind};
pub use client::{build_prompt, build_summary_prompt, Adapter, FeatureText, LlmClient, LlmClientConfig};
pub use merge::{max_pool, mean_pool, pool_matrices, select_per_concept, MergeMethod};
pub use transport::{HttpResponse, Transport, UreqTransport};

use rayon::prelude::*;

use crate::embedding::{EmbeddingMatrix, EmbeddingSource};
use crate::error::Result;

/// Generate and embed feature text for every concept, in id order.
pub fn featurize(concepts: &[String], generator: &LlmClient, embedder: &LlmClient) -> Result<EmbeddingMatrix> {
    let rows: Vec<Vec<f64>> = concepts
        .par_iter()
        .map(|c| {
            let ft = generator.generate_feature_text(c)?;
            embedder.embed_text(&ft.text)
        })
        .collect::<Result<_>>()?;
    EmbeddingMatrix::from_rows(&rows, EmbeddingSource::Llm(generator.model_id().to_string()))
}

/// Summarize the per-model feature texts of every concept with `summarizer`,
/// then embed the summaries. `texts_by_model` maps model id to per-concept texts.
pub fn featurize_summaries(
    concepts: &[String],
    texts_by_model: &std::collections::BTreeMap<String, Vec<String>>,
    summarizer: &LlmClient,
    embedder: &LlmClient,
) -> Result<EmbeddingMatrix> {
    let rows: Vec<Vec<f64>> = concepts
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let texts: Vec<(String, String)> = texts_by_model
                .iter()
                .map(|(m, ts)| (m.clone(), ts[i].clone()))
                .collect();
            let summary = summarizer.summarize_merge(c, &texts)?;
            embedder.embed_text(&summary.text)
        })
        .collect::<Result<_>>()?;
    EmbeddingMatrix::from_rows(&rows, EmbeddingSource::Merged)
}
