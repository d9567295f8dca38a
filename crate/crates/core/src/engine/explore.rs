//! Randomized explorer: unseen images far from everything processed.

use rand::Rng;
use rayon::prelude::*;

use crate::ids::ImageId;
use crate::pq::PqIndex;
use crate::sampling::sample_unseen;

/// Per-image minimum symmetric PQ distance to the processed images seen so
/// far. Kept incrementally when that is cheaper than scanning candidates.
#[derive(Clone, Debug, Default)]
pub struct DistanceCache {
    min_dist: Vec<f32>,
    covered: Vec<bool>,
    covered_count: usize,
}

impl DistanceCache {
    fn reset(&mut self, n: usize) {
        self.min_dist = vec![f32::INFINITY; n];
        self.covered = vec![false; n];
        self.covered_count = 0;
    }

    /// Minimum distance from each candidate to `processed`.
    pub fn distances(&mut self, index: &PqIndex, processed: &[ImageId], candidates: &[u32]) -> Vec<f32> {
        let n = index.len();
        if self.min_dist.len() != n {
            self.reset(n);
        }
        let still_covered = processed.iter().filter(|p| self.covered[p.index()]).count();
        if still_covered != self.covered_count {
            // something left the processed set: the cached minima are too small
            self.reset(n);
        }
        let fresh: Vec<ImageId> = processed
            .iter()
            .copied()
            .filter(|p| !self.covered[p.index()])
            .collect();
        let incremental = fresh.len().saturating_mul(n);
        let direct = candidates.len().saturating_mul(processed.len());
        if incremental <= direct {
            for p in fresh {
                let rows = index.sdc.rows_for(index.codes.code(p.index()));
                let codes = &index.codes;
                self.min_dist
                    .par_iter_mut()
                    .with_min_len(8192)
                    .enumerate()
                    .for_each(|(i, d)| *d = d.min(rows.distance(codes.code(i))));
                self.covered[p.index()] = true;
                self.covered_count += 1;
            }
            candidates.iter().map(|&c| self.min_dist[c as usize]).collect()
        } else {
            candidates
                .par_iter()
                .map(|&c| {
                    let rows = index.sdc.rows_for(index.codes.code(c as usize));
                    processed
                        .iter()
                        .map(|p| rows.distance(index.codes.code(p.index())))
                        .fold(f32::INFINITY, f32::min)
                })
                .collect()
        }
    }
}

/// Draw `multiplier × count` unseen candidates and return the `count`
/// farthest from `processed` (ties to the lower id). With nothing processed
/// the draw itself is returned.
#[allow(clippy::too_many_arguments)]
pub fn explore<R: Rng + ?Sized>(
    index: &PqIndex,
    cache: &mut DistanceCache,
    processed: &[ImageId],
    excluded: impl Fn(ImageId) -> bool,
    count: usize,
    multiplier: usize,
    rng: &mut R,
) -> Vec<ImageId> {
    if count == 0 {
        return Vec::new();
    }
    let pool = count.saturating_mul(multiplier.max(1));
    let candidates = sample_unseen(index.len(), pool, |i| excluded(ImageId(i)), rng);
    if processed.is_empty() {
        return candidates.into_iter().take(count).map(ImageId).collect();
    }
    let dists = cache.distances(index, processed, &candidates);
    let mut scored: Vec<(f32, u32)> = dists.into_iter().zip(candidates).collect();
    scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(count).map(|(_, c)| ImageId(c)).collect()
}

/// Candidate pool size the explorer draws for a request.
pub fn candidate_pool_size(count: usize, multiplier: usize) -> usize {
    count.saturating_mul(multiplier.max(1))
}
