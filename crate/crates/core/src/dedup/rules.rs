//! Metadata-conditioned thresholds.
//!
//! Rules are evaluated in order and the first match decides: the pair is
//! kept if its distance is below the rule's threshold, or dropped if the
//! rule rejects. Attribute values are compared trimmed and
//! case-insensitively; a value missing on either side only satisfies
//! `any_missing` (or `any`).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CandidatePair, DedupError};
use crate::corpus::Posting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrMatch {
    Same,
    Different,
    AnyMissing,
    Any,
}

impl AttrMatch {
    fn matches(self, a: Option<&str>, b: Option<&str>) -> bool {
        let norm = |s: &str| s.trim().to_lowercase();
        match (self, a, b) {
            (AttrMatch::Any, _, _) => true,
            (AttrMatch::AnyMissing, a, b) => a.is_none() || b.is_none(),
            (AttrMatch::Same, Some(a), Some(b)) => norm(a) == norm(b),
            (AttrMatch::Different, Some(a), Some(b)) => norm(a) != norm(b),
            _ => false,
        }
    }
}

impl fmt::Display for AttrMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrMatch::Same => "same",
            AttrMatch::Different => "different",
            AttrMatch::AnyMissing => "any_missing",
            AttrMatch::Any => "any",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleAction {
    /// Keep iff distance is below this threshold; `None` uses the base one.
    Threshold(Option<f64>),
    Reject,
}

/// Configuration shape: `{company, language, location, action, threshold?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleSpec {
    #[serde(default = "any")]
    company: AttrMatch,
    #[serde(default = "any")]
    language: AttrMatch,
    #[serde(default = "any")]
    location: AttrMatch,
    action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
}

fn any() -> AttrMatch {
    AttrMatch::Any
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleSpec", into = "RuleSpec")]
pub struct ExpertRule {
    pub company: AttrMatch,
    pub language: AttrMatch,
    pub location: AttrMatch,
    pub action: RuleAction,
}

impl TryFrom<RuleSpec> for ExpertRule {
    type Error = String;

    fn try_from(s: RuleSpec) -> Result<Self, Self::Error> {
        let action = match (s.action.as_str(), s.threshold) {
            ("threshold", t) => RuleAction::Threshold(t),
            ("reject", None) => RuleAction::Reject,
            ("reject", Some(_)) => return Err("a reject rule takes no threshold".into()),
            (other, _) => return Err(format!("unknown rule action {other:?}")),
        };
        ExpertRule {
            company: s.company,
            language: s.language,
            location: s.location,
            action,
        }
        .validated()
        .map_err(|e| e.to_string())
    }
}

impl From<ExpertRule> for RuleSpec {
    fn from(r: ExpertRule) -> Self {
        let (action, threshold) = match r.action {
            RuleAction::Threshold(t) => ("threshold".to_string(), t),
            RuleAction::Reject => ("reject".to_string(), None),
        };
        RuleSpec {
            company: r.company,
            language: r.language,
            location: r.location,
            action,
            threshold,
        }
    }
}

impl ExpertRule {
    pub fn threshold(company: AttrMatch, language: AttrMatch, location: AttrMatch, theta: Option<f64>) -> Self {
        Self {
            company,
            language,
            location,
            action: RuleAction::Threshold(theta),
        }
    }

    /// Matches every pair and applies the base threshold.
    pub fn catch_all() -> Self {
        Self::threshold(AttrMatch::Any, AttrMatch::Any, AttrMatch::Any, None)
    }

    pub fn is_catch_all(&self) -> bool {
        self.company == AttrMatch::Any && self.language == AttrMatch::Any && self.location == AttrMatch::Any
    }

    /// Language accepts `same | different | any`; thresholds lie in (0, 2].
    pub fn validated(self) -> Result<Self, DedupError> {
        if self.language == AttrMatch::AnyMissing {
            return Err(DedupError::InvalidRule("language supports same, different or any".into()));
        }
        if let RuleAction::Threshold(Some(t)) = self.action {
            if !(t > 0.0 && t <= 2.0) {
                return Err(DedupError::InvalidRule(format!("threshold {t} outside (0, 2]")));
            }
        }
        Ok(self)
    }

    pub fn matches(&self, a: &Posting, b: &Posting) -> bool {
        self.company.matches(a.company.as_deref(), b.company.as_deref())
            && self.language.matches(a.language.as_deref(), b.language.as_deref())
            && self.location.matches(a.location.as_deref(), b.location.as_deref())
    }
}

/// Default expert ruleset:
///
/// 1. same company and same location: threshold 0.30
/// 2. same company, different language: threshold 0.28
/// 3. company and location both unknown on some side: base threshold
/// 4. catch-all: base threshold
pub fn example_ruleset() -> Vec<ExpertRule> {
    use AttrMatch::*;
    vec![
        ExpertRule::threshold(Same, Any, Same, Some(0.30)),
        ExpertRule::threshold(Same, Different, Any, Some(0.28)),
        ExpertRule::threshold(AnyMissing, Any, AnyMissing, None),
        ExpertRule::catch_all(),
    ]
}

/// A pair kept by the rule engine and the index of the deciding rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RuledPair {
    pub pair: CandidatePair,
    pub rule: usize,
    pub threshold: f64,
}

/// Applies `rules` in order; the first matching rule decides each pair.
///
/// An empty rule list behaves as a single catch-all at `base_theta`, which
/// makes the result identical to thresholding alone.
pub fn apply_rules(
    pairs: &[CandidatePair],
    postings: &HashMap<&str, &Posting>,
    rules: &[ExpertRule],
    base_theta: f64,
) -> Result<Vec<RuledPair>, DedupError> {
    let fallback = [ExpertRule::catch_all()];
    let rules = if rules.is_empty() { &fallback[..] } else { rules };
    let mut kept = Vec::new();
    for p in pairs {
        let a = postings.get(p.id_a.as_str()).ok_or_else(|| DedupError::UnknownId(p.id_a.clone()))?;
        let b = postings.get(p.id_b.as_str()).ok_or_else(|| DedupError::UnknownId(p.id_b.clone()))?;
        let (idx, rule) = rules
            .iter()
            .enumerate()
            .find(|(_, r)| r.matches(a, b))
            .ok_or_else(|| DedupError::NoMatchingRule(p.id_a.clone(), p.id_b.clone()))?;
        if let RuleAction::Threshold(t) = rule.action {
            let threshold = t.unwrap_or(base_theta);
            if p.distance < threshold {
                kept.push(RuledPair {
                    pair: p.clone(),
                    rule: idx,
                    threshold,
                });
            }
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn posting(id: &str, company: Option<&str>, location: Option<&str>, lang: Option<&str>) -> Posting {
        Posting {
            id: id.into(),
            title: "t".into(),
            description: String::new(),
            company: company.map(String::from),
            location: location.map(String::from),
            country: None,
            language: lang.map(String::from),
            retrieval_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            source: "s".into(),
        }
    }

    fn run(a: &Posting, b: &Posting, d: f64, rules: &[ExpertRule]) -> Vec<RuledPair> {
        let map = HashMap::from([(a.id.as_str(), a), (b.id.as_str(), b)]);
        apply_rules(&[CandidatePair::new(&a.id, &b.id, d).unwrap()], &map, rules, 0.25).unwrap()
    }

    #[test]
    fn relaxed_threshold_for_same_company_and_location() {
        use AttrMatch::*;
        let rules = vec![ExpertRule::threshold(Same, Any, Same, Some(0.30)), ExpertRule::catch_all()];
        let a = posting("a", Some("ACME"), Some("Berlin"), Some("de"));
        let b = posting("b", Some("acme "), Some("berlin"), Some("en"));
        let kept = run(&a, &b, 0.28, &rules);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].rule, 0);

        let c = posting("c", Some("Other"), Some("Berlin"), Some("de"));
        assert!(run(&a, &c, 0.28, &rules).is_empty());
    }

    #[test]
    fn missing_matches_only_any_missing() {
        let a = posting("a", None, Some("x"), None);
        let b = posting("b", Some("c"), Some("x"), None);
        assert!(AttrMatch::AnyMissing.matches(a.company.as_deref(), b.company.as_deref()));
        assert!(!AttrMatch::Same.matches(a.company.as_deref(), b.company.as_deref()));
        assert!(!AttrMatch::Different.matches(a.company.as_deref(), b.company.as_deref()));
    }

    #[test]
    fn reject_drops_pair() {
        use AttrMatch::*;
        let rules = vec![
            ExpertRule {
                company: Different,
                language: Any,
                location: Any,
                action: RuleAction::Reject,
            },
            ExpertRule::catch_all(),
        ];
        let a = posting("a", Some("x"), None, None);
        let b = posting("b", Some("y"), None, None);
        assert!(run(&a, &b, 0.01, &rules).is_empty());
    }

    #[test]
    fn no_match_is_an_error() {
        use AttrMatch::*;
        let rules = vec![ExpertRule::threshold(Same, Any, Any, None)];
        let a = posting("a", None, None, None);
        let b = posting("b", None, None, None);
        let map = HashMap::from([("a", &a), ("b", &b)]);
        let pairs = [CandidatePair::new("a", "b", 0.1).unwrap()];
        assert!(matches!(
            apply_rules(&pairs, &map, &rules, 0.25),
            Err(DedupError::NoMatchingRule(_, _))
        ));
    }

    #[test]
    fn unknown_id() {
        let a = posting("a", None, None, None);
        let map = HashMap::from([("a", &a)]);
        let pairs = [CandidatePair::new("a", "zz", 0.1).unwrap()];
        assert!(matches!(apply_rules(&pairs, &map, &[], 0.25), Err(DedupError::UnknownId(_))));
    }

    #[test]
    fn config_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            rules: Vec<ExpertRule>,
        }
        let text = toml::to_string(&Wrap { rules: example_ruleset() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.rules, example_ruleset());

        let bad = "[[rules]]\naction = \"threshold\"\nthreshold = 3.0\n";
        assert!(toml::from_str::<Wrap>(bad).is_err());
        let bad = "[[rules]]\nlanguage = \"any_missing\"\naction = \"threshold\"\n";
        assert!(toml::from_str::<Wrap>(bad).is_err());
    }
}
