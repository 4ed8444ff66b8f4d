use std::collections::HashMap;

use super::{canonical_ids, DedupError, DuplicateLabel, LabeledPair, Reason};
use crate::corpus::Posting;
use crate::normalize::{ExactGroup, Fingerprint};

/// Label of one pair.
///
/// Equal fingerprints make a full duplicate, a passed semantic check a
/// semantic one; either becomes temporal when the retrieval dates differ.
pub fn classify(
    id_a: &str,
    id_b: &str,
    postings: &HashMap<&str, &Posting>,
    fingerprints: &HashMap<&str, Fingerprint>,
    semantic_pass: bool,
) -> Result<DuplicateLabel, DedupError> {
    let pa = postings.get(id_a).ok_or_else(|| DedupError::UnknownId(id_a.to_string()))?;
    let pb = postings.get(id_b).ok_or_else(|| DedupError::UnknownId(id_b.to_string()))?;
    let fa = fingerprints.get(id_a).ok_or_else(|| DedupError::UnknownId(id_a.to_string()))?;
    let fb = fingerprints.get(id_b).ok_or_else(|| DedupError::UnknownId(id_b.to_string()))?;
    let same_date = pa.retrieval_date == pb.retrieval_date;
    Ok(if fa == fb {
        if same_date {
            DuplicateLabel::Full
        } else {
            DuplicateLabel::Temporal
        }
    } else if semantic_pass {
        if same_date {
            DuplicateLabel::Semantic
        } else {
            DuplicateLabel::Temporal
        }
    } else {
        DuplicateLabel::None
    })
}

/// Every within-group pair of each exact group, labelled FULL or TEMPORAL.
pub fn expand_exact_groups(
    groups: &[ExactGroup],
    postings: &HashMap<&str, &Posting>,
    fingerprints: &HashMap<&str, Fingerprint>,
) -> Result<Vec<LabeledPair>, DedupError> {
    let mut out = Vec::new();
    for g in groups {
        let members: Vec<&String> = g.member_ids.iter().collect();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let (x, y) = canonical_ids(a, b);
                let label = classify(x, y, postings, fingerprints, false)?;
                out.push(LabeledPair {
                    id_a: x.to_string(),
                    id_b: y.to_string(),
                    label,
                    distance: None,
                    reason: Reason::ExactFingerprint,
                });
            }
        }
    }
    Ok(out)
}
