//! Text cleaning, case-insensitive fingerprinting and exact-duplicate grouping.
//!
//! The cleaning steps run in a fixed order: tag stripping, entity decoding,
//! camel-case splitting, charset filtering, then punctuation/whitespace
//! collapsing. Later steps can expose patterns an earlier step would have
//! acted on (removing a filtered symbol can glue `a` to `B`, for instance),
//! so [`clean_text`] repeats the sequence until the text stops changing.

mod fingerprint;
mod steps;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Posting;

pub use fingerprint::Fingerprint;
pub use steps::{collapse_punct_and_ws, decode_entities, filter_charset, split_camel_case, strip_html};

/// Punctuation retained by [`filter_charset`] unless configured otherwise.
pub const DEFAULT_KEEP_PUNCT: &str = ".,;:!?()/-&'+%\"";

/// Passes of the cleaning sequence before giving up on a fixpoint. In
/// practice the sequence settles after two.
const MAX_PASSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeConfig {
    /// Keep only ASCII alphanumerics, ASCII whitespace and `keep_punct`.
    pub ascii_only: bool,
    pub keep_punct: String,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            ascii_only: false,
            keep_punct: DEFAULT_KEEP_PUNCT.to_string(),
        }
    }
}

impl NormalizeConfig {
    pub fn paper_strict() -> Self {
        Self {
            ascii_only: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("fingerprint collision between {0:?} and {1:?}")]
    FingerprintCollision(String, String),
}

/// Cleaned text of one posting and its fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalText {
    pub source_id: String,
    pub text: String,
    pub fingerprint: Fingerprint,
}

impl CanonicalText {
    /// Wraps the cleaned text back into a posting (text as title, empty
    /// description) so it can be pushed through the pipeline again.
    pub fn as_posting(&self, template: &Posting) -> Posting {
        Posting {
            id: self.source_id.clone(),
            title: self.text.clone(),
            description: String::new(),
            ..template.clone()
        }
    }
}

/// One full pass of the cleaning steps.
fn clean_once(text: &str, config: &NormalizeConfig) -> String {
    let s = strip_html(text);
    let s = decode_entities(&s);
    let s = split_camel_case(&s);
    let s = filter_charset(&s, config.ascii_only, &config.keep_punct);
    collapse_punct_and_ws(&s)
}

/// Runs the cleaning sequence to a fixpoint.
pub fn clean_text(text: &str, config: &NormalizeConfig) -> String {
    let mut cur = clean_once(text, config);
    for _ in 1..MAX_PASSES {
        let next = clean_once(&cur, config);
        if next == cur {
            return cur;
        }
        cur = next;
    }
    cur
}

pub fn canonicalize(posting: &Posting, config: &NormalizeConfig) -> CanonicalText {
    let text = clean_text(&posting.full_text(), config);
    CanonicalText {
        source_id: posting.id.clone(),
        fingerprint: Fingerprint::of_text(&text),
        text,
    }
}

pub fn canonicalize_all(postings: &[Posting], config: &NormalizeConfig) -> Vec<CanonicalText> {
    use rayon::prelude::*;
    postings.par_iter().map(|p| canonicalize(p, config)).collect()
}

/// Postings sharing one fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactGroup {
    pub fingerprint: Fingerprint,
    /// Lexicographically smallest member id.
    pub representative_id: String,
    pub member_ids: BTreeSet<String>,
}

/// Partitions canonical texts by fingerprint. Groups come back sorted by
/// representative id; singletons are included.
pub fn group_exact(canonicals: &[CanonicalText]) -> Result<Vec<ExactGroup>, NormalizeError> {
    let mut by_fp: HashMap<Fingerprint, (String, BTreeSet<String>)> = HashMap::new();
    for c in canonicals {
        let lowered = c.text.to_lowercase();
        match by_fp.get_mut(&c.fingerprint) {
            Some((first_lower, members)) => {
                if *first_lower != lowered {
                    let other = members.iter().next().cloned().unwrap_or_default();
                    return Err(NormalizeError::FingerprintCollision(other, c.source_id.clone()));
                }
                members.insert(c.source_id.clone());
            }
            None => {
                by_fp.insert(c.fingerprint, (lowered, BTreeSet::from([c.source_id.clone()])));
            }
        }
    }
    let mut groups: BTreeMap<String, ExactGroup> = BTreeMap::new();
    for (fingerprint, (_, member_ids)) in by_fp {
        let representative_id = member_ids.iter().next().expect("non-empty").clone();
        groups.insert(
            representative_id.clone(),
            ExactGroup {
                fingerprint,
                representative_id,
                member_ids,
            },
        );
    }
    Ok(groups.into_values().collect())
}
