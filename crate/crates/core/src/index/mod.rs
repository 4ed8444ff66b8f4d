//! Exact (flat) and inverted-file (IVF) L2 vector indexes.
//!
//! Reported distances are true Euclidean distances, not squared ones as
//! some ANN libraries return, so a distance threshold can be applied to
//! them directly. Hits are ordered by `(distance, id)`.

pub mod kmeans;
mod persist;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingVector;
use crate::scalar::{squared_l2, Scalar};

pub use persist::{FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cannot build an index from no vectors")]
    EmptyInput,
    #[error("nlist {nlist} exceeds the number of points {points}")]
    NlistExceedsPoints { nlist: usize, points: usize },
    #[error("invalid index configuration: {0}")]
    InvalidConfig(String),
    #[error("zero vector for {0:?} cannot be indexed")]
    ZeroVector(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Flat,
    Ivf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub kind: IndexKind,
    /// Expected vector dimension; 0 means "take it from the data".
    pub dim: usize,
    pub nlist: usize,
    pub nprobe: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            kind: IndexKind::Flat,
            dim: 0,
            nlist: 64,
            nprobe: 8,
            kmeans_iters: 20,
            seed: 0,
        }
    }
}

impl IndexConfig {
    pub fn flat(dim: usize) -> Self {
        Self {
            kind: IndexKind::Flat,
            dim,
            ..Self::default()
        }
    }

    pub fn ivf(dim: usize, nlist: usize, nprobe: usize, seed: u64) -> Self {
        Self {
            kind: IndexKind::Ivf,
            dim,
            nlist,
            nprobe,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IvfLists<T> {
    /// `nlist * dim` centroid coordinates.
    pub centroids: Vec<T>,
    /// Row ranges of each list in the vector table; `nlist + 1` entries.
    pub offsets: Vec<u64>,
    pub nprobe: usize,
}

impl<T> IvfLists<T> {
    fn nlist(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// An immutable L2 index over `(id, vector)` rows.
#[derive(Debug)]
pub struct VectorIndex<T: Scalar = f32> {
    pub(crate) dim: usize,
    pub(crate) ids: Vec<String>,
    /// Row-major; for IVF rows are grouped by list.
    pub(crate) data: Vec<T>,
    pub(crate) ivf: Option<IvfLists<T>>,
    comparisons: AtomicU64,
}

impl<T: Scalar> Clone for VectorIndex<T> {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            ids: self.ids.clone(),
            data: self.data.clone(),
            ivf: self.ivf.clone(),
            comparisons: AtomicU64::new(self.comparisons()),
        }
    }
}

fn hit_order(a: &(f64, usize), b: &(f64, usize), ids: &[String]) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| ids[a.1].cmp(&ids[b.1]))
}

impl<T: Scalar> VectorIndex<T> {
    pub(crate) fn from_parts(dim: usize, ids: Vec<String>, data: Vec<T>, ivf: Option<IvfLists<T>>) -> Self {
        Self {
            dim,
            ids,
            data,
            ivf,
            comparisons: AtomicU64::new(0),
        }
    }

    /// Builds an index. Flat keeps insertion order; IVF trains `nlist`
    /// centroids and stores each vector in its nearest centroid's list.
    pub fn build(vectors: &[(String, EmbeddingVector<T>)], config: &IndexConfig) -> Result<Self, IndexError> {
        if vectors.is_empty() {
            return Err(IndexError::EmptyInput);
        }
        let dim = if config.dim == 0 { vectors[0].1.dim() } else { config.dim };
        let mut seen = HashSet::with_capacity(vectors.len());
        let mut ids = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for (id, v) in vectors {
            if v.dim() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    actual: v.dim(),
                });
            }
            if v.is_zero() {
                return Err(IndexError::ZeroVector(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(IndexError::DuplicateId(id.clone()));
            }
            ids.push(id.clone());
            data.extend_from_slice(v.values());
        }
        match config.kind {
            IndexKind::Flat => Ok(Self::from_parts(dim, ids, data, None)),
            IndexKind::Ivf => Self::build_ivf(dim, ids, data, config),
        }
    }

    fn build_ivf(dim: usize, ids: Vec<String>, data: Vec<T>, config: &IndexConfig) -> Result<Self, IndexError> {
        let n = ids.len();
        if config.nlist == 0 || config.nprobe == 0 || config.nprobe > config.nlist {
            return Err(IndexError::InvalidConfig(format!(
                "need 1 <= nprobe ({}) <= nlist ({})",
                config.nprobe, config.nlist
            )));
        }
        if config.nlist > n {
            return Err(IndexError::NlistExceedsPoints {
                nlist: config.nlist,
                points: n,
            });
        }
        let centroids = kmeans::train(&data, dim, config.nlist, config.kmeans_iters, config.seed);
        let labels = kmeans::assign(&data, &centroids, dim);

        let mut order: Vec<usize> = (0..n).collect();
        // stable: insertion order within each list
        order.sort_by_key(|&i| labels[i]);
        let mut offsets = vec![0u64; config.nlist + 1];
        for &l in &labels {
            offsets[l + 1] += 1;
        }
        for i in 0..config.nlist {
            offsets[i + 1] += offsets[i];
        }
        let mut grouped_ids = Vec::with_capacity(n);
        let mut grouped = Vec::with_capacity(data.len());
        for &i in &order {
            grouped_ids.push(ids[i].clone());
            grouped.extend_from_slice(&data[i * dim..(i + 1) * dim]);
        }
        Ok(Self::from_parts(
            dim,
            grouped_ids,
            grouped,
            Some(IvfLists {
                centroids,
                offsets,
                nprobe: config.nprobe,
            }),
        ))
    }

    pub fn kind(&self) -> IndexKind {
        if self.ivf.is_some() {
            IndexKind::Ivf
        } else {
            IndexKind::Flat
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn nlist(&self) -> Option<usize> {
        self.ivf.as_ref().map(IvfLists::nlist)
    }

    pub fn nprobe(&self) -> Option<usize> {
        self.ivf.as_ref().map(|l| l.nprobe)
    }

    /// Sets the number of lists scanned per query (IVF only; clamped to
    /// `1..=nlist`). `nprobe` is a search parameter and is not persisted.
    pub fn set_nprobe(&mut self, nprobe: usize) {
        if let Some(l) = self.ivf.as_mut() {
            l.nprobe = nprobe.clamp(1, l.nlist());
        }
    }

    /// Sizes of the inverted lists, in list order.
    pub fn list_sizes(&self) -> Option<Vec<usize>> {
        self.ivf
            .as_ref()
            .map(|l| l.offsets.windows(2).map(|w| (w[1] - w[0]) as usize).collect())
    }

    /// Ids held by inverted list `list`.
    pub fn list_ids(&self, list: usize) -> Option<&[String]> {
        let l = self.ivf.as_ref()?;
        if list >= l.nlist() {
            return None;
        }
        Some(&self.ids[l.offsets[list] as usize..l.offsets[list + 1] as usize])
    }

    pub fn centroids(&self) -> Option<&[T]> {
        self.ivf.as_ref().map(|l| l.centroids.as_slice())
    }

    /// Stored rows in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.ids.iter().map(String::as_str).zip(self.data.chunks_exact(self.dim))
    }

    /// Stored rows as owned embedding vectors.
    pub fn to_vectors(&self) -> Vec<(String, EmbeddingVector<T>)> {
        self.rows()
            .map(|(id, v)| (id.to_string(), EmbeddingVector::from_values(v.to_vec())))
            .collect()
    }

    /// Vector-to-point distance evaluations performed by searches so far
    /// (centroid comparisons excluded).
    pub fn comparisons(&self) -> u64 {
        self.comparisons.load(AtomicOrdering::Relaxed)
    }

    pub fn reset_comparisons(&self) {
        self.comparisons.store(0, AtomicOrdering::Relaxed);
    }

    fn check_dim(&self, query: &[T]) -> Result<(), IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(())
    }

    /// The `k` nearest stored vectors. Flat scans everything; IVF scans the
    /// `nprobe` lists whose centroids are nearest to the query.
    pub fn search(&self, query: &[T], k: usize) -> Result<Vec<SearchHit>, IndexError> {
        self.check_dim(query)?;
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut cand: Vec<(f64, usize)> = match &self.ivf {
            None => (0..self.len()).map(|r| (self.row_dist(query, r), r)).collect(),
            Some(lists) => {
                let mut probes: Vec<(f64, usize)> = lists
                    .centroids
                    .chunks_exact(self.dim)
                    .enumerate()
                    .map(|(i, c)| (squared_l2(query, c), i))
                    .collect();
                probes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                probes
                    .iter()
                    .take(lists.nprobe)
                    .flat_map(|&(_, l)| lists.offsets[l] as usize..lists.offsets[l + 1] as usize)
                    .map(|r| (self.row_dist(query, r), r))
                    .collect()
            }
        };
        self.comparisons.fetch_add(cand.len() as u64, AtomicOrdering::Relaxed);

        let ids = &self.ids;
        if cand.len() > k {
            cand.select_nth_unstable_by(k - 1, |a, b| hit_order(a, b, ids));
            cand.truncate(k);
        }
        cand.sort_by(|a, b| hit_order(a, b, ids));
        Ok(cand
            .into_iter()
            .map(|(distance, r)| SearchHit {
                id: ids[r].clone(),
                distance,
            })
            .collect())
    }

    /// True L2 distance. Hits are ranked on this rather than the squared
    /// value: two squared distances can round to the same root, and the tie
    /// must then fall to the id.
    #[inline]
    fn row_dist(&self, query: &[T], row: usize) -> f64 {
        squared_l2(query, &self.data[row * self.dim..(row + 1) * self.dim]).sqrt()
    }

    /// Element-wise [`search`](Self::search), parallel over queries.
    pub fn search_batch<Q: AsRef<[T]> + Sync>(&self, queries: &[Q], k: usize) -> Result<Vec<Vec<SearchHit>>, IndexError> {
        queries.par_iter().map(|q| self.search(q.as_ref(), k)).collect()
    }
}

impl<T: Scalar> AsRef<[T]> for EmbeddingVector<T> {
    fn as_ref(&self) -> &[T] {
        self.values()
    }
}
