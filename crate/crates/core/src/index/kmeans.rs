//! k-means++ seeding followed by a fixed number of Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::scalar::{squared_l2, Scalar};

const SPLIT_EPS: f64 = 1.0 / 1024.0;

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest_centroid<T: Scalar>(point: &[T], centroids: &[T], dim: usize) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_l2(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub fn assign<T: Scalar>(data: &[T], centroids: &[T], dim: usize) -> Vec<usize> {
    data.par_chunks_exact(dim)
        .map(|p| nearest_centroid(p, centroids, dim).0)
        .collect()
}

/// k-means++ seeding: the first centre uniformly, each further centre with
/// probability proportional to squared distance from the closest chosen one.
pub fn kmeans_pp_init<T: Scalar>(data: &[T], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = data.len() / dim;
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut min_d: Vec<f64> = (0..n).into_par_iter().map(|i| squared_l2(point(i), point(first))).collect();

    for _ in 1..k {
        let total: f64 = min_d.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in min_d.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        let c = point(chosen).to_vec();
        min_d
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, m)| *m = m.min(squared_l2(point(i), &c)));
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Trains `k` centroids over `data` (row-major, `dim` columns).
///
/// Deterministic for a given `seed`. Clusters that end an iteration empty
/// are re-seeded by splitting the most populous cluster: its centroid is
/// copied and the two copies are nudged apart by a relative `1/1024` along
/// alternating coordinates.
pub fn train<T: Scalar>(data: &[T], dim: usize, k: usize, iters: usize, seed: u64) -> Vec<T> {
    let n = data.len() / dim;
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(data, dim, k, &mut rng);

    for _ in 0..iters {
        let labels = assign(data, &centroids, dim);
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            let row = &data[i * dim..(i + 1) * dim];
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row) {
                *s += x.to_acc();
            }
        }
        let mut next: Vec<f64> = centroids.iter().map(|x| x.to_acc()).collect();
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    next[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
        for empty in 0..k {
            if counts[empty] != 0 {
                continue;
            }
            let largest = (0..k).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).expect("k >= 1");
            for d in 0..dim {
                let v = next[largest * dim + d];
                let (up, down) = (v * (1.0 + SPLIT_EPS), v * (1.0 - SPLIT_EPS));
                if d % 2 == 0 {
                    next[empty * dim + d] = up;
                    next[largest * dim + d] = down;
                } else {
                    next[empty * dim + d] = down;
                    next[largest * dim + d] = up;
                }
            }
            counts[empty] = counts[largest] / 2;
            counts[largest] -= counts[empty];
        }
        centroids = next.into_iter().map(T::from_acc).collect();
    }
    centroids
}
