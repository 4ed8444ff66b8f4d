//! Pluggable translation with a persistent cache and a bounded number of
//! backend batches in flight.

mod backend;
mod cache;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concurrency::bounded_map;
use crate::normalize::Fingerprint;
use crate::retry::{Attempt, RetryPolicy};

pub use backend::{make_backend, BackendKind, DictionaryTranslator, IdentityTranslator, RemoteTranslator, API_KEY_ENV};
pub use cache::{CacheKey, TranslationCache, TranslationCacheEntry};

pub const DEFAULT_TARGET: &str = "en";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TranslateError {
    #[error("translation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("translation backend rate limited (retry after {retry_after_secs:?} s)")]
    RateLimited { retry_after_secs: Option<u64> },
    #[error("invalid language code {0:?}")]
    InvalidLanguage(String),
    #[error("translator configuration error: {0}")]
    Config(String),
    #[error("translation cache error: {0}")]
    Cache(String),
}

impl TranslateError {
    fn into_attempt(self) -> Attempt<TranslateError> {
        match self {
            TranslateError::BackendUnavailable(_) => Attempt::Retry(self, None),
            TranslateError::RateLimited { retry_after_secs } => {
                Attempt::Retry(self, retry_after_secs.map(std::time::Duration::from_secs))
            }
            other => Attempt::Fatal(other),
        }
    }
}

/// A translation backend. One call translates one batch of texts sharing a
/// source and target language.
pub trait Translator: Send + Sync {
    /// Stable name; part of the cache key.
    fn name(&self) -> &str;

    fn translate(&self, texts: &[String], source: Option<&str>, target: &str) -> Result<Vec<String>, TranslateError>;
}

impl<T: Translator + ?Sized> Translator for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn translate(&self, texts: &[String], source: Option<&str>, target: &str) -> Result<Vec<String>, TranslateError> {
        (**self).translate(texts, source, target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub fingerprint: Fingerprint,
    pub text: String,
    pub source_language: Option<String>,
    pub target_language: String,
}

impl TranslationRequest {
    pub fn new(fingerprint: Fingerprint, text: impl Into<String>, source_language: Option<String>) -> Self {
        Self {
            fingerprint,
            text: text.into(),
            source_language,
            target_language: DEFAULT_TARGET.to_string(),
        }
    }
}

/// ISO-639 style code: two or three ASCII lowercase letters.
pub fn is_valid_language(code: &str) -> bool {
    (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslateOptions {
    pub max_in_flight: usize,
    pub batch_size: usize,
    pub retry: RetryPolicy,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            batch_size: 32,
            retry: RetryPolicy::default(),
        }
    }
}

struct Batch {
    source: Option<String>,
    target: String,
    keys: Vec<CacheKey>,
    texts: Vec<String>,
}

/// Translates `requests`, returning one output per request in input order.
///
/// Cache hits never reach the backend, and requests sharing a cache key are
/// sent once. Misses are grouped by language pair, cut into batches of
/// `options.batch_size`, and dispatched with at most
/// `options.max_in_flight` batches outstanding. Failed batches are retried
/// per `options.retry`.
pub fn translate_batch<B: Translator + ?Sized>(
    requests: &[TranslationRequest],
    backend: &B,
    cache: &TranslationCache,
    options: &TranslateOptions,
) -> Result<Vec<String>, TranslateError> {
    if options.max_in_flight == 0 || options.batch_size == 0 {
        return Err(TranslateError::Config("max_in_flight and batch_size must be positive".into()));
    }
    for r in requests {
        if !is_valid_language(&r.target_language) {
            return Err(TranslateError::InvalidLanguage(r.target_language.clone()));
        }
        if let Some(src) = &r.source_language {
            if !is_valid_language(src) {
                return Err(TranslateError::InvalidLanguage(src.clone()));
            }
        }
    }

    let mut out: Vec<Option<String>> = vec![None; requests.len()];
    let mut batches: Vec<Batch> = Vec::new();
    // (source, target) -> index of the currently filling batch
    let mut open: HashMap<(Option<String>, String), usize> = HashMap::new();
    let mut queued: HashMap<CacheKey, ()> = HashMap::new();

    for (i, r) in requests.iter().enumerate() {
        if r.text.is_empty() {
            out[i] = Some(String::new());
            continue;
        }
        let key = CacheKey::new(r.fingerprint, &r.target_language, backend.name());
        if let Some(hit) = cache.get(&key) {
            out[i] = Some(hit);
            continue;
        }
        if queued.insert(key.clone(), ()).is_some() {
            continue;
        }
        let source = r.source_language.clone().filter(|s| s != crate::corpus::UNKNOWN_LANGUAGE);
        let group = (source.clone(), r.target_language.clone());
        let idx = match open.get(&group) {
            Some(&b) if batches[b].texts.len() < options.batch_size => b,
            _ => {
                batches.push(Batch {
                    source,
                    target: r.target_language.clone(),
                    keys: Vec::new(),
                    texts: Vec::new(),
                });
                open.insert(group, batches.len() - 1);
                batches.len() - 1
            }
        };
        batches[idx].keys.push(key);
        batches[idx].texts.push(r.text.clone());
    }

    if !batches.is_empty() {
        log::debug!(
            "translating {} texts in {} batches via {}",
            queued.len(),
            batches.len(),
            backend.name()
        );
    }

    let translated = bounded_map(&batches, options.max_in_flight, |_, b| {
        options.retry.run(|_| {
            let res = backend
                .translate(&b.texts, b.source.as_deref(), &b.target)
                .map_err(TranslateError::into_attempt)?;
            if res.len() != b.texts.len() {
                return Err(Attempt::Fatal(TranslateError::BackendUnavailable(format!(
                    "backend returned {} translations for {} texts",
                    res.len(),
                    b.texts.len()
                ))));
            }
            Ok(res)
        })
    })?;

    let mut fresh: HashMap<&CacheKey, &String> = HashMap::new();
    let mut entries = Vec::new();
    for (b, texts) in batches.iter().zip(&translated) {
        for (k, t) in b.keys.iter().zip(texts) {
            fresh.insert(k, t);
            entries.push((k.clone(), t.clone()));
        }
    }
    cache.insert_many(entries)?;

    for (i, r) in requests.iter().enumerate() {
        if out[i].is_none() {
            let key = CacheKey::new(r.fingerprint, &r.target_language, backend.name());
            out[i] = Some(fresh.get(&key).map(|s| s.to_string()).expect("every miss was translated"));
        }
    }
    Ok(out.into_iter().map(|o| o.expect("filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap as Map;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    struct Counting<T> {
        inner: T,
        calls: AtomicUsize,
        texts: AtomicUsize,
    }

    impl<T: Translator> Counting<T> {
        fn new(inner: T) -> Self {
            Self {
                inner,
                calls: AtomicUsize::new(0),
                texts: AtomicUsize::new(0),
            }
        }
    }

    impl<T: Translator> Translator for Counting<T> {
        fn name(&self) -> &str {
            self.inner.name()
        }

        fn translate(&self, texts: &[String], s: Option<&str>, t: &str) -> Result<Vec<String>, TranslateError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.translate(texts, s, t)
        }
    }

    fn req(text: &str) -> TranslationRequest {
        TranslationRequest::new(Fingerprint::of_text(text), text, None)
    }

    #[test]
    fn identity_backend() {
        let cache = TranslationCache::in_memory();
        let out = translate_batch(&[req("hund")], &IdentityTranslator, &cache, &TranslateOptions::default()).unwrap();
        assert_eq!(out, ["hund"]);
    }

    #[test]
    fn dictionary_backend() {
        let dict = DictionaryTranslator::new(Map::from([("hund".to_string(), "dog".to_string())]));
        let cache = TranslationCache::in_memory();
        let out = translate_batch(&[req("hund kennel")], &dict, &cache, &TranslateOptions::default()).unwrap();
        assert_eq!(out, ["dog kennel"]);
    }

    #[test]
    fn repeated_fingerprint_hits_backend_once() {
        let backend = Counting::new(IdentityTranslator);
        let cache = TranslationCache::in_memory();
        let opts = TranslateOptions::default();
        let out = translate_batch(&[req("a b"), req("a b")], &backend, &cache, &opts).unwrap();
        assert_eq!(out, ["a b", "a b"]);
        assert_eq!(backend.texts.load(Ordering::SeqCst), 1);
        // second call is served from cache entirely
        let out = translate_batch(&[req("a b")], &backend, &cache, &opts).unwrap();
        assert_eq!(out, ["a b"]);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn batches_split_by_size_and_language() {
        let backend = Counting::new(IdentityTranslator);
        let cache = TranslationCache::in_memory();
        let opts = TranslateOptions {
            batch_size: 2,
            ..TranslateOptions::default()
        };
        let mut reqs: Vec<TranslationRequest> = (0..5).map(|i| req(&format!("t{i}"))).collect();
        reqs[4].source_language = Some("de".into());
        let out = translate_batch(&reqs, &backend, &cache, &opts).unwrap();
        assert_eq!(out, ["t0", "t1", "t2", "t3", "t4"]);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn invalid_language_rejected() {
        let cache = TranslationCache::in_memory();
        let mut r = req("x");
        r.target_language = "English".into();
        assert_eq!(
            translate_batch(&[r], &IdentityTranslator, &cache, &TranslateOptions::default()),
            Err(TranslateError::InvalidLanguage("English".into()))
        );
    }

    struct Flaky {
        failures_left: Mutex<u32>,
        err: TranslateError,
    }

    impl Translator for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }

        fn translate(&self, texts: &[String], _: Option<&str>, _: &str) -> Result<Vec<String>, TranslateError> {
            let mut left = self.failures_left.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Err(self.err.clone());
            }
            Ok(texts.to_vec())
        }
    }

    fn fast_retry(n: u32) -> TranslateOptions {
        TranslateOptions {
            retry: RetryPolicy {
                max_attempts: n,
                base_delay_ms: 1,
                max_delay_ms: 2,
            },
            ..TranslateOptions::default()
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let backend = Flaky {
            failures_left: Mutex::new(2),
            err: TranslateError::BackendUnavailable("503".into()),
        };
        let cache = TranslationCache::in_memory();
        assert_eq!(translate_batch(&[req("x")], &backend, &cache, &fast_retry(5)).unwrap(), ["x"]);
    }

    #[test]
    fn exhausted_retries_surface_error() {
        let backend = Flaky {
            failures_left: Mutex::new(10),
            err: TranslateError::RateLimited { retry_after_secs: None },
        };
        let cache = TranslationCache::in_memory();
        assert_eq!(
            translate_batch(&[req("x")], &backend, &cache, &fast_retry(3)),
            Err(TranslateError::RateLimited { retry_after_secs: None })
        );
        assert_eq!(*backend.failures_left.lock().unwrap(), 7);
    }

    #[test]
    fn empty_text_skips_backend() {
        let backend = Counting::new(IdentityTranslator);
        let cache = TranslationCache::in_memory();
        let out = translate_batch(&[req("")], &backend, &cache, &TranslateOptions::default()).unwrap();
        assert_eq!(out, [""]);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    }
}
