use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{TranslateError, Translator};
use crate::http::{self, HttpFailure};

/// Environment variable holding the remote translation API key.
pub const API_KEY_ENV: &str = "DEDUP_TRANSLATE_API_KEY";

/// Returns the text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, texts: &[String], _: Option<&str>, _: &str) -> Result<Vec<String>, TranslateError> {
        Ok(texts.to_vec())
    }
}

/// Word-map translator.
///
/// Input is split on whitespace; leading and trailing punctuation of each
/// word is kept aside and re-attached. At each position the longest
/// multi-word key is tried first, matching exactly and then lowercased.
/// Unknown words pass through unchanged. Output words are joined by single
/// spaces.
#[derive(Debug, Clone)]
pub struct DictionaryTranslator {
    map: HashMap<String, String>,
    max_key_words: usize,
    name: String,
}

struct Word<'a> {
    raw: &'a str,
    lead: &'a str,
    core: &'a str,
    trail: &'a str,
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn split_word(raw: &str) -> Word<'_> {
    let start = raw.find(|c: char| !is_punct(c)).unwrap_or(raw.len());
    let end = raw[start..]
        .char_indices()
        .rev()
        .find(|&(_, c)| !is_punct(c))
        .map(|(i, c)| start + i + c.len_utf8())
        .unwrap_or(start);
    Word {
        raw,
        lead: &raw[..start],
        core: &raw[start..end],
        trail: &raw[end..],
    }
}

impl DictionaryTranslator {
    pub fn new(map: HashMap<String, String>) -> Self {
        let mut sorted: Vec<(&String, &String)> = map.iter().collect();
        sorted.sort();
        let mut h = Sha256::new();
        for (k, v) in sorted {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        let name = format!("dictionary:{}", &hex::encode(h.finalize())[..16]);
        let max_key_words = map.keys().map(|k| k.split_whitespace().count()).max().unwrap_or(1).max(1);
        Self {
            map,
            max_key_words,
            name,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, TranslateError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| TranslateError::Config(format!("cannot read dictionary {}: {e}", path.display())))?;
        let map: HashMap<String, String> = serde_json::from_str(&raw)
            .map_err(|e| TranslateError::Config(format!("bad dictionary {}: {e}", path.display())))?;
        Ok(Self::new(map))
    }

    fn lookup(&self, key: &str) -> Option<&String> {
        self.map.get(key).or_else(|| self.map.get(&key.to_lowercase()))
    }

    pub fn translate_text(&self, text: &str) -> String {
        let words: Vec<Word> = text.split_whitespace().map(split_word).collect();
        let mut out: Vec<String> = Vec::with_capacity(words.len());
        let mut i = 0;
        'outer: while i < words.len() {
            let longest = self.max_key_words.min(words.len() - i);
            for len in (1..=longest).rev() {
                let span = &words[i..i + len];
                if span.iter().any(|w| w.core.is_empty()) {
                    continue;
                }
                // interior punctuation breaks a multi-word phrase
                if len > 1
                    && (span[..len - 1].iter().any(|w| !w.trail.is_empty())
                        || span[1..].iter().any(|w| !w.lead.is_empty()))
                {
                    continue;
                }
                let key = span.iter().map(|w| w.core).collect::<Vec<_>>().join(" ");
                if let Some(t) = self.lookup(&key) {
                    out.push(format!("{}{}{}", span[0].lead, t, span[len - 1].trail));
                    i += len;
                    continue 'outer;
                }
            }
            out.push(words[i].raw.to_string());
            i += 1;
        }
        out.join(" ")
    }
}

impl Translator for DictionaryTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, texts: &[String], _: Option<&str>, _: &str) -> Result<Vec<String>, TranslateError> {
        Ok(texts.iter().map(|t| self.translate_text(t)).collect())
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    texts: &'a [String],
    target: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    translations: Vec<String>,
}

/// HTTP translation service client.
///
/// `POST {"texts": [...], "target": "en", "source": "de"?}` answered by
/// `{"translations": [...]}`. The API key, if any, is sent as a bearer token.
#[derive(Debug, Clone)]
pub struct RemoteTranslator {
    endpoint: String,
    api_key: Option<String>,
    name: String,
    client: reqwest::blocking::Client,
}

impl RemoteTranslator {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, TranslateError> {
        http::check_endpoint(endpoint).map_err(TranslateError::Config)?;
        let client = http::client(timeout).map_err(TranslateError::Config)?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            api_key,
            name: format!("remote:{endpoint}"),
            client,
        })
    }
}

impl Translator for RemoteTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, texts: &[String], source: Option<&str>, target: &str) -> Result<Vec<String>, TranslateError> {
        let body = RemoteRequest { texts, target, source };
        match http::post_json::<_, RemoteResponse>(&self.client, &self.endpoint, self.api_key.as_deref(), &body) {
            Ok(r) => Ok(r.translations),
            Err(HttpFailure::Unavailable(m)) => Err(TranslateError::BackendUnavailable(m)),
            Err(HttpFailure::RateLimited(after)) => Err(TranslateError::RateLimited {
                retry_after_secs: after.map(|d| d.as_secs()),
            }),
            Err(HttpFailure::Rejected(m)) => Err(TranslateError::Config(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Identity,
    Dictionary { path: PathBuf },
    Remote { endpoint: String },
}

/// Builds a translator. The remote kind reads its API key from
/// [`API_KEY_ENV`].
pub fn make_backend(kind: &BackendKind) -> Result<Box<dyn Translator>, TranslateError> {
    Ok(match kind {
        BackendKind::Identity => Box::new(IdentityTranslator),
        BackendKind::Dictionary { path } => Box::new(DictionaryTranslator::from_file(path)?),
        BackendKind::Remote { endpoint } => Box::new(RemoteTranslator::new(
            endpoint,
            std::env::var(API_KEY_ENV).ok(),
            Duration::from_secs(30),
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict(pairs: &[(&str, &str)]) -> DictionaryTranslator {
        DictionaryTranslator::new(pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    #[test]
    fn identity_is_identity() {
        let t = make_backend(&BackendKind::Identity).unwrap();
        assert_eq!(t.translate(&["x y".into()], None, "en").unwrap(), ["x y"]);
    }

    #[test]
    fn empty_dictionary_passes_through() {
        let d = dict(&[]);
        assert_eq!(d.translate_text("Koch gesucht!"), "Koch gesucht!");
    }

    #[test]
    fn longest_match_first() {
        let d = dict(&[("chef", "cook"), ("chef de cuisine", "head cook"), ("de", "of")]);
        assert_eq!(d.translate_text("chef de cuisine"), "head cook");
        assert_eq!(d.translate_text("chef de"), "cook of");
    }

    #[test]
    fn punctuation_reattached() {
        let d = dict(&[("hund", "dog"), ("katze", "cat")]);
        assert_eq!(d.translate_text("(hund), Katze!"), "(dog), cat!");
        // a comma inside the span blocks the phrase match
        let d = dict(&[("a b", "x")]);
        assert_eq!(d.translate_text("a, b"), "a, b");
        assert_eq!(d.translate_text("a b."), "x.");
    }

    #[test]
    fn names_distinguish_dictionaries() {
        assert_ne!(dict(&[("a", "b")]).name(), dict(&[("a", "c")]).name());
        assert_eq!(dict(&[("a", "b")]).name(), dict(&[("a", "b")]).name());
    }

    #[test]
    fn missing_dictionary_is_config_error() {
        let r = make_backend(&BackendKind::Dictionary {
            path: "/nonexistent/dict.json".into(),
        });
        assert!(matches!(r, Err(TranslateError::Config(_))));
    }

    #[test]
    fn malformed_endpoint_is_config_error() {
        let r = make_backend(&BackendKind::Remote {
            endpoint: "not a url".into(),
        });
        assert!(matches!(r, Err(TranslateError::Config(_))));
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let t = make_backend(&BackendKind::Remote {
            endpoint: "http://127.0.0.1:1/translate".into(),
        })
        .unwrap();
        assert!(matches!(
            t.translate(&["x".into()], None, "en"),
            Err(TranslateError::BackendUnavailable(_))
        ));
    }
}
