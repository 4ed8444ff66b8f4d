//! Candidate pairs, thresholding, expert rules, duplicate classification and
//! the end-to-end pipeline.

mod candidates;
mod classify;
pub mod pipeline;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use candidates::{candidate_pairs, saturation_report, threshold_filter, threshold_sweep, Candidates, SaturationReport, SweepRow};
pub use classify::{classify, expand_exact_groups};
pub use rules::{apply_rules, example_ruleset, AttrMatch, ExpertRule, RuleAction, RuledPair};

/// L2 threshold below which a candidate pair counts as a semantic duplicate.
pub const DEFAULT_THETA: f64 = 0.25;
/// Neighbours retrieved per record.
pub const DEFAULT_K: usize = 100;
/// Thresholds reported by the sweep table.
pub const DEFAULT_SWEEP: [f64; 8] = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45];

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("unknown posting id {0:?}")]
    UnknownId(String),
    #[error("no expert rule matched pair ({0:?}, {1:?}); the rule list needs a catch-all entry")]
    NoMatchingRule(String, String),
    #[error("sweep thresholds must be sorted ascending")]
    UnsortedThetas,
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Index(#[from] crate::index::IndexError),
}

/// Unordered pair with `id_a < id_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub id_a: String,
    pub id_b: String,
    pub distance: f64,
}

impl CandidatePair {
    /// Orders the ids; `None` for a self-pair.
    pub fn new(a: &str, b: &str, distance: f64) -> Option<Self> {
        match a.cmp(b) {
            std::cmp::Ordering::Less => Some(Self {
                id_a: a.to_string(),
                id_b: b.to_string(),
                distance,
            }),
            std::cmp::Ordering::Greater => Some(Self {
                id_a: b.to_string(),
                id_b: a.to_string(),
                distance,
            }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.id_a, &self.id_b)
    }
}

/// Orders two ids canonically.
pub fn canonical_ids<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DuplicateLabel {
    Full,
    Semantic,
    Temporal,
    None,
}

impl DuplicateLabel {
    pub const POSITIVE: [DuplicateLabel; 3] = [DuplicateLabel::Full, DuplicateLabel::Semantic, DuplicateLabel::Temporal];

    pub fn as_str(&self) -> &'static str {
        match self {
            DuplicateLabel::Full => "FULL",
            DuplicateLabel::Semantic => "SEMANTIC",
            DuplicateLabel::Temporal => "TEMPORAL",
            DuplicateLabel::None => "NONE",
        }
    }
}

impl fmt::Display for DuplicateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DuplicateLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FULL" => Ok(DuplicateLabel::Full),
            "SEMANTIC" => Ok(DuplicateLabel::Semantic),
            "TEMPORAL" => Ok(DuplicateLabel::Temporal),
            "NONE" => Ok(DuplicateLabel::None),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Why a pair was labelled a duplicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reason {
    ExactFingerprint,
    SemanticThreshold,
    /// Kept under the threshold of the expert rule at this position.
    Rule(usize),
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::ExactFingerprint => f.write_str("exact_fingerprint"),
            Reason::SemanticThreshold => f.write_str("semantic_threshold"),
            Reason::Rule(i) => write!(f, "rule({i})"),
        }
    }
}

impl FromStr for Reason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact_fingerprint" => Ok(Reason::ExactFingerprint),
            "semantic_threshold" => Ok(Reason::SemanticThreshold),
            _ => s
                .strip_prefix("rule(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse().ok())
                .map(Reason::Rule)
                .ok_or_else(|| format!("unknown reason {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub id_a: String,
    pub id_b: String,
    pub label: DuplicateLabel,
    pub distance: Option<f64>,
    pub reason: Reason,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_is_canonical() {
        let p = CandidatePair::new("b", "a", 0.1).unwrap();
        assert_eq!(p.key(), ("a", "b"));
        assert!(CandidatePair::new("a", "a", 0.0).is_none());
    }

    #[test]
    fn reason_round_trip() {
        for r in [Reason::ExactFingerprint, Reason::SemanticThreshold, Reason::Rule(3)] {
            assert_eq!(r.to_string().parse::<Reason>().unwrap(), r);
        }
    }

    #[test]
    fn label_parse() {
        assert_eq!("semantic".parse::<DuplicateLabel>().unwrap(), DuplicateLabel::Semantic);
        assert!("dup".parse::<DuplicateLabel>().is_err());
    }
}
