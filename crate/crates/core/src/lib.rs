//! Temporal concept co-occurrence graphs and link prediction.
//!
//! The crate covers the whole offline pipeline: detecting concept mentions
//! in a document corpus, building a temporal co-occurrence graph, splitting
//! it chronologically, producing node features (random-walk and LINE
//! baselines, LLM text embeddings, time-decayed PPMI factorizations), and
//! training/evaluating link predictors on the resulting splits.

pub mod classic;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod llm;
pub mod predict;
pub mod seed;
pub mod timedecay;

pub use corpus::{ConceptVocab, CooccurrenceRecord, Document};
pub use embedding::{EmbeddingMatrix, EmbeddingSource};
pub use error::{Error, Result};
pub use eval::{EvalReport, ScoredEdge};
pub use graph::{Edge, EdgeSplit, SplitSpec, TemporalGraph};
pub use predict::{Arch, ModelConfig, ModelParams};
