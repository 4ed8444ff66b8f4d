//! Tokenization, truncation diagnostics and text embedders.

mod hashed;
mod remote;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{bucket_insert, buckets_from_edges, Bucket};
use crate::scalar::Scalar;

pub use hashed::{hashed_bow_embed, token_hash, HashedEmbedder};
pub use remote::RemoteEmbedder;
pub use tokenize::{tokenize, Tokenizer, WordTokenizer};

/// Input length limit of the reference sentence encoder, in tokens.
pub const DEFAULT_MAX_TOKENS: usize = 384;
pub const DEFAULT_DIM: usize = 256;

/// Tolerance on the norm of emitted unit vectors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedder configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormFlag {
    Unit,
    Zero,
}

/// Dense vector with a recorded norm state. Zero vectors come from texts
/// with no tokens and are never indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T: Scalar = f32> {
    values: Vec<T>,
    norm: NormFlag,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn zero(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
            norm: NormFlag::Zero,
        }
    }

    /// L2-normalizes `raw` (accumulated in `f64`). An all-zero input yields
    /// the zero vector.
    pub fn from_unnormalized(raw: &[f64]) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Self::zero(raw.len());
        }
        Self {
            values: raw.iter().map(|v| T::from_acc(v / norm)).collect(),
            norm: NormFlag::Unit,
        }
    }

    /// Wraps values that are already unit-norm, e.g. read back from an index.
    /// The flag is derived from the data.
    pub fn from_values(values: Vec<T>) -> Self {
        let norm = if values.iter().all(|v| v.is_zero()) {
            NormFlag::Zero
        } else {
            NormFlag::Unit
        };
        Self { values, norm }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm_flag(&self) -> NormFlag {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == NormFlag::Zero
    }

    pub fn l2_norm(&self) -> f64 {
        crate::scalar::dot(&self.values, &self.values).sqrt()
    }
}

/// Text-to-vector backend.
pub trait Embedder<T: Scalar = f32>: Send + Sync {
    fn dim(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<T>>, EmbedError>;
}

/// Embeds `texts` and checks the backend honored its declared dimension.
pub fn embed_batch<T: Scalar, E: Embedder<T> + ?Sized>(
    texts: &[String],
    backend: &E,
) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
    let out = backend.embed_batch(texts)?;
    if out.len() != texts.len() {
        return Err(EmbedError::BackendUnavailable(format!(
            "backend returned {} vectors for {} texts",
            out.len(),
            texts.len()
        )));
    }
    let expected = backend.dim();
    if let Some(v) = out.iter().find(|v| v.dim() != expected) {
        return Err(EmbedError::DimensionMismatch {
            expected,
            actual: v.dim(),
        });
    }
    Ok(out)
}

/// Keeps the first `max_tokens` tokens and reports how many were dropped.
pub fn truncate_tokens<S>(mut tokens: Vec<S>, max_tokens: usize) -> (Vec<S>, usize) {
    assert!(max_tokens >= 1, "max_tokens must be positive");
    let lost = tokens.len().saturating_sub(max_tokens);
    tokens.truncate(max_tokens);
    (tokens, lost)
}

pub const LOSS_BUCKET_EDGES: [usize; 7] = [1, 50, 100, 250, 500, 1000, 2000];

/// Token loss across a corpus. Mean and median are taken over truncated
/// records only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub max_tokens: usize,
    pub n_total: usize,
    pub n_truncated: usize,
    pub fraction_truncated: f64,
    pub mean_tokens_lost: f64,
    pub median_tokens_lost: f64,
    pub histogram_over_limit: Vec<Bucket>,
}

impl TruncationReport {
    pub fn from_token_counts(counts: impl IntoIterator<Item = usize>, max_tokens: usize) -> Self {
        assert!(max_tokens >= 1, "max_tokens must be positive");
        let mut n_total = 0usize;
        let mut losses = Vec::new();
        let mut histogram_over_limit = buckets_from_edges(&LOSS_BUCKET_EDGES);
        for c in counts {
            n_total += 1;
            let lost = c.saturating_sub(max_tokens);
            if lost > 0 {
                losses.push(lost);
                bucket_insert(&mut histogram_over_limit, lost);
            }
        }
        losses.sort_unstable();
        let n_truncated = losses.len();
        let mean_tokens_lost = if n_truncated == 0 {
            0.0
        } else {
            losses.iter().sum::<usize>() as f64 / n_truncated as f64
        };
        let median_tokens_lost = match n_truncated {
            0 => 0.0,
            n if n % 2 == 1 => losses[n / 2] as f64,
            n => (losses[n / 2 - 1] + losses[n / 2]) as f64 / 2.0,
        };
        Self {
            max_tokens,
            n_total,
            n_truncated,
            fraction_truncated: if n_total == 0 {
                0.0
            } else {
                n_truncated as f64 / n_total as f64
            },
            mean_tokens_lost,
            median_tokens_lost,
            histogram_over_limit,
        }
    }
}

pub fn truncation_report<S: AsRef<str>>(texts: &[S], max_tokens: usize) -> TruncationReport {
    TruncationReport::from_token_counts(texts.iter().map(|t| tokenize(t.as_ref()).len()), max_tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncate_examples() {
        let (kept, lost) = truncate_tokens(vec![0u8; 400], 384);
        assert_eq!((kept.len(), lost), (384, 16));
        let (kept, lost) = truncate_tokens(vec![0u8; 100], 384);
        assert_eq!((kept.len(), lost), (100, 0));
        let (kept, lost) = truncate_tokens(vec![0u8; 924], 384);
        assert_eq!((kept.len(), lost), (384, 540));
    }

    #[test]
    fn report_examples() {
        let r = TruncationReport::from_token_counts([100, 400, 500], 384);
        assert_eq!(r.n_truncated, 2);
        assert_eq!(r.fraction_truncated, 2.0 / 3.0);
        assert_eq!(r.mean_tokens_lost, 66.0);
        assert_eq!(r.median_tokens_lost, 66.0);

        let r = TruncationReport::from_token_counts([1, 384, 200], 384);
        assert_eq!(r.n_truncated, 0);
        assert_eq!(r.fraction_truncated, 0.0);
        assert_eq!(r.mean_tokens_lost, 0.0);
        assert_eq!(r.median_tokens_lost, 0.0);
    }

    #[test]
    fn from_unnormalized_is_unit() {
        let v = EmbeddingVector::<f32>::from_unnormalized(&[3.0, 4.0]);
        assert_eq!(v.values(), &[0.6, 0.8]);
        assert!((v.l2_norm() - 1.0).abs() < UNIT_NORM_TOLERANCE);
        assert!(EmbeddingVector::<f64>::from_unnormalized(&[0.0, 0.0]).is_zero());
    }
}
