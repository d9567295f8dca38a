//! Lloyd's k-means with k-means++ seeding, used to train subquantizers.

use rand::Rng;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub dim: usize,
    pub k: usize,
    /// `k * dim` values, row-major.
    pub centroids: Vec<f32>,
    pub iterations: usize,
    pub inertia: f64,
}

#[inline]
pub(crate) fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid and its squared distance; ties go to the lower index.
pub fn nearest(centroids: &[f32], dim: usize, x: &[f32]) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_l2(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Cluster `data` (row-major, `dim` columns) into `k` groups.
///
/// Runs until no assignment changes or `max_iter` rounds have passed.
/// Requires `k <= rows`.
pub fn kmeans<R: Rng + ?Sized>(data: &[f32], dim: usize, k: usize, max_iter: usize, rng: &mut R) -> KMeans {
    let rows = data.len() / dim;
    assert!(k >= 1 && k <= rows, "k-means needs 1 <= k <= rows");
    let mut centroids = plus_plus_init(data, dim, k, rng);
    let mut assignment = vec![usize::MAX; rows];
    let mut iterations = 0;
    let mut inertia = 0.0;

    while iterations < max_iter {
        iterations += 1;
        let assigned: Vec<(usize, f32)> = data
            .par_chunks_exact(dim)
            .map(|x| nearest(&centroids, dim, x))
            .collect();
        let mut changed = false;
        for (slot, &(c, _)) in assignment.iter_mut().zip(&assigned) {
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        inertia = assigned.iter().map(|&(_, d)| f64::from(d)).sum();
        if !changed {
            break;
        }

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (x, &c) in data.chunks_exact(dim).zip(&assignment) {
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                *s += f64::from(v);
            }
        }

        // Empty clusters take the points worst served by their current centroid.
        let mut worst: Vec<usize> = Vec::new();
        if counts.contains(&0) {
            worst = (0..rows).collect();
            worst.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
        }
        let mut donor = worst.into_iter();
        for c in 0..k {
            let centroid = &mut centroids[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                for (dst, s) in centroid.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = (s / counts[c] as f64) as f32;
                }
            } else if let Some(p) = donor.next() {
                centroid.copy_from_slice(&data[p * dim..(p + 1) * dim]);
            }
        }
    }

    KMeans {
        dim,
        k,
        centroids,
        iterations,
        inertia,
    }
}

fn plus_plus_init<R: Rng + ?Sized>(data: &[f32], dim: usize, k: usize, rng: &mut R) -> Vec<f32> {
    let rows = data.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..rows);
    centroids.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    let mut min_d2: Vec<f32> = data
        .par_chunks_exact(dim)
        .map(|x| squared_l2(x, &centroids[..dim]))
        .collect();

    for _ in 1..k {
        let total: f64 = min_d2.iter().map(|&d| f64::from(d)).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = rows - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                target -= f64::from(d);
                if target < 0.0 && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..rows)
        };
        let start = centroids.len();
        centroids.extend_from_slice(&data[pick * dim..(pick + 1) * dim]);
        let newest = &centroids[start..start + dim];
        min_d2
            .par_iter_mut()
            .zip(data.par_chunks_exact(dim))
            .for_each(|(m, x)| *m = m.min(squared_l2(x, newest)));
    }
    centroids
}
