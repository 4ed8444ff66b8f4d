use sha2::{Digest, Sha256};

use super::{tokenize, truncate_tokens, EmbedError, Embedder, EmbeddingVector, DEFAULT_DIM, DEFAULT_MAX_TOKENS};
use crate::scalar::Scalar;

/// Stable 64-bit token hash: the first 8 bytes of SHA-256 over the token's
/// UTF-8 bytes, read big-endian.
pub fn token_hash(token: &str) -> u64 {
    let digest = Sha256::digest(token.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Signed feature hashing of a token bag: each token adds `+1` (top hash bit
/// clear) or `-1` (set) to bucket `hash mod dim`; the sum is L2-normalized.
/// Callers apply truncation beforehand.
pub fn hashed_bow_embed<T: Scalar, S: AsRef<str>>(tokens: &[S], dim: usize) -> EmbeddingVector<T> {
    assert!(dim >= 2, "dimension must be at least 2");
    let mut acc = vec![0.0f64; dim];
    for t in tokens {
        let h = token_hash(t.as_ref());
        let bucket = (h % dim as u64) as usize;
        acc[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
    EmbeddingVector::from_unnormalized(&acc)
}

/// Deterministic, model-free embedder: word tokens, truncated to
/// `max_tokens`, then [`hashed_bow_embed`].
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
    max_tokens: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM, DEFAULT_MAX_TOKENS).expect("valid defaults")
    }
}

impl HashedEmbedder {
    pub fn new(dim: usize, max_tokens: usize) -> Result<Self, EmbedError> {
        if dim < 2 {
            return Err(EmbedError::Config(format!("dimension {dim} < 2")));
        }
        if max_tokens == 0 {
            return Err(EmbedError::Config("max_tokens must be positive".into()));
        }
        Ok(Self { dim, max_tokens })
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn embed_one<T: Scalar>(&self, text: &str) -> EmbeddingVector<T> {
        let (tokens, _) = truncate_tokens(tokenize(text), self.max_tokens);
        hashed_bow_embed(&tokens, self.dim)
    }
}

impl<T: Scalar> Embedder<T> for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
        use rayon::prelude::*;
        Ok(texts.par_iter().map(|t| self.embed_one(t)).collect())
    }
}
