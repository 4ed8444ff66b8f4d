use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{tokenize, EmbedError, Embedder, EmbeddingVector};
use crate::concurrency::bounded_map;
use crate::http::{self, HttpFailure};
use crate::retry::{Attempt, RetryPolicy};
use crate::scalar::Scalar;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// Embedding service client.
///
/// Wire format: `POST {"texts": [...]}` answered by
/// `{"dim": D, "vectors": [[...], ...]}`. The declared `dim` must equal the
/// configured one. Returned vectors are re-normalized locally; texts with no
/// tokens are never sent and map to the zero vector.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: String,
    dim: usize,
    api_key: Option<String>,
    batch_size: usize,
    max_in_flight: usize,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: &str,
        dim: usize,
        api_key: Option<String>,
        batch_size: usize,
        max_in_flight: usize,
        retry: RetryPolicy,
    ) -> Result<Self, EmbedError> {
        http::check_endpoint(endpoint).map_err(EmbedError::Config)?;
        if dim < 2 || batch_size == 0 || max_in_flight == 0 {
            return Err(EmbedError::Config(
                "dim >= 2, batch_size >= 1 and max_in_flight >= 1 required".into(),
            ));
        }
        let client = http::client(Duration::from_secs(60)).map_err(EmbedError::Config)?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            dim,
            api_key,
            batch_size,
            max_in_flight,
            retry,
            client,
        })
    }

    fn call(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        self.retry.run(|_| {
            match http::post_json::<_, EmbedResponse>(
                &self.client,
                &self.endpoint,
                self.api_key.as_deref(),
                &EmbedRequest { texts },
            ) {
                Ok(resp) => {
                    if resp.dim != self.dim {
                        return Err(Attempt::Fatal(EmbedError::DimensionMismatch {
                            expected: self.dim,
                            actual: resp.dim,
                        }));
                    }
                    if resp.vectors.len() != texts.len() {
                        return Err(Attempt::Fatal(EmbedError::BackendUnavailable(format!(
                            "{} vectors for {} texts",
                            resp.vectors.len(),
                            texts.len()
                        ))));
                    }
                    if let Some(v) = resp.vectors.iter().find(|v| v.len() != self.dim) {
                        return Err(Attempt::Fatal(EmbedError::DimensionMismatch {
                            expected: self.dim,
                            actual: v.len(),
                        }));
                    }
                    Ok(resp.vectors)
                }
                Err(HttpFailure::Unavailable(m)) => Err(Attempt::Retry(EmbedError::BackendUnavailable(m), None)),
                Err(HttpFailure::RateLimited(after)) => Err(Attempt::Retry(
                    EmbedError::BackendUnavailable("rate limited".into()),
                    after,
                )),
                Err(HttpFailure::Rejected(m)) => Err(Attempt::Fatal(EmbedError::BackendUnavailable(m))),
            }
        })
    }
}

impl<T: Scalar> Embedder<T> for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
        let live: Vec<usize> = (0..texts.len())
            .filter(|&i| !tokenize(&texts[i]).is_empty())
            .collect();
        let batches: Vec<Vec<String>> = live
            .chunks(self.batch_size)
            .map(|c| c.iter().map(|&i| texts[i].clone()).collect())
            .collect();
        let results = bounded_map(&batches, self.max_in_flight, |_, b| self.call(b))?;

        let mut out: Vec<EmbeddingVector<T>> = (0..texts.len()).map(|_| EmbeddingVector::zero(self.dim)).collect();
        for (&i, raw) in live.iter().zip(results.into_iter().flatten()) {
            out[i] = EmbeddingVector::from_unnormalized(&raw);
        }
        Ok(out)
    }
}
