use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CandidatePair, DedupError};
use crate::embed::EmbeddingVector;
use crate::index::{SearchHit, VectorIndex};
use crate::scalar::Scalar;

/// Result of k-NN candidate generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    /// Unique canonical pairs sorted by `(id_a, id_b)`.
    pub pairs: Vec<CandidatePair>,
    /// Each query's neighbours, itself excluded, in query order.
    pub neighbors: Vec<(String, Vec<SearchHit>)>,
}

/// Queries each vector's `k` nearest neighbours (excluding itself) and
/// unions the hits into unordered pairs. `k` is effectively capped at
/// `n - 1`.
pub fn candidate_pairs<T: Scalar>(
    index: &VectorIndex<T>,
    vectors: &[(String, EmbeddingVector<T>)],
    k: usize,
) -> Result<Candidates, DedupError> {
    let neighbors: Vec<(String, Vec<SearchHit>)> = vectors
        .par_iter()
        .map(|(id, v)| {
            let mut hits = index.search(v.values(), k + 1)?;
            if let Some(pos) = hits.iter().position(|h| &h.id == id) {
                hits.remove(pos);
            }
            hits.truncate(k);
            Ok((id.clone(), hits))
        })
        .collect::<Result<_, crate::index::IndexError>>()?;

    let mut unique: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (id, hits) in &neighbors {
        for h in hits {
            if let Some(p) = CandidatePair::new(id, &h.id, h.distance) {
                unique.entry((p.id_a, p.id_b)).or_insert(p.distance);
            }
        }
    }
    let pairs = unique
        .into_iter()
        .map(|((id_a, id_b), distance)| CandidatePair { id_a, id_b, distance })
        .collect();
    Ok(Candidates { pairs, neighbors })
}

/// Pairs strictly closer than `theta`.
pub fn threshold_filter(pairs: &[CandidatePair], theta: f64) -> Vec<CandidatePair> {
    pairs.iter().filter(|p| p.distance < theta).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub kept_count: usize,
    /// Relative to the number of input pairs; 0 for an empty input.
    pub kept_fraction: f64,
}

/// Kept-pair counts at each threshold. `thetas` must be ascending.
pub fn threshold_sweep(pairs: &[CandidatePair], thetas: &[f64]) -> Result<Vec<SweepRow>, DedupError> {
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(DedupError::UnsortedThetas);
    }
    let mut dists: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
    dists.sort_by(f64::total_cmp);
    Ok(thetas
        .iter()
        .map(|&theta| {
            let kept_count = dists.partition_point(|&d| d < theta);
            SweepRow {
                theta,
                kept_count,
                kept_fraction: if dists.is_empty() {
                    0.0
                } else {
                    kept_count as f64 / dists.len() as f64
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub k: usize,
    pub theta: f64,
    pub saturated_ids: Vec<String>,
    pub count: usize,
}

/// Records whose whole neighbour list lies under `theta`: exactly `k` hits
/// and the k-th closer than `theta`. More true matches may lie beyond the
/// cap for these.
pub fn saturation_report(neighbors: &[(String, Vec<SearchHit>)], theta: f64, k: usize) -> SaturationReport {
    let mut saturated_ids: Vec<String> = neighbors
        .iter()
        .filter(|(_, hits)| k > 0 && hits.len() == k && hits[k - 1].distance < theta)
        .map(|(id, _)| id.clone())
        .collect();
    saturated_ids.sort();
    SaturationReport {
        k,
        theta,
        count: saturated_ids.len(),
        saturated_ids,
    }
}
