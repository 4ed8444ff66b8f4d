//! Full, semantic and temporal duplicate detection for multilingual text
//! corpora.
//!
//! The pipeline cleans and fingerprints each record, collapses exact
//! duplicates, optionally translates the survivors to English, embeds them,
//! retrieves k nearest neighbours from a flat or IVF index, filters the
//! candidates by L2 distance and metadata rules, and labels every pair FULL,
//! SEMANTIC or TEMPORAL. Translators and embedders are traits, with
//! deterministic offline implementations, so the whole pipeline runs without
//! network access.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f32`, which is what the on-disk index stores.

pub mod concurrency;
pub mod config;
pub mod corpus;
pub mod dedup;
pub mod embed;
pub mod error;
pub mod eval;
mod http;
pub mod index;
pub mod normalize;
pub mod retry;
pub mod scalar;
pub mod translate;

pub use config::{Mode, PipelineConfig};
pub use corpus::{load_postings, pair_count, Posting};
pub use dedup::pipeline::{run_pipeline, Backends, PipelineRun, RunReport};
pub use dedup::{CandidatePair, DuplicateLabel, LabeledPair};
pub use error::{Error, ErrorKind};
pub use eval::{score, EvalReport, GoldSet};
pub use index::{IndexConfig, IndexKind, SearchHit};
pub use normalize::{canonicalize, CanonicalText, Fingerprint};
pub use scalar::Scalar;

/// Single-precision embedding.
pub type Embedding = embed::EmbeddingVector<f32>;
/// Single-precision vector index; the persisted form.
pub type Index = index::VectorIndex<f32>;
/// Double-precision variants, handy for oracles.
pub type Embedding64 = embed::EmbeddingVector<f64>;
pub type Index64 = index::VectorIndex<f64>;
