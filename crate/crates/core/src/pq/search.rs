//! Nearest-neighbour suggestion modes over the PQ index.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::knn::KnnMatrix;
use super::PqIndex;
use crate::dataset::Collection;
use crate::ids::ImageId;
use crate::sampling::{sample_slice, sample_unseen};

/// Sampling caps that keep nearest-neighbour search interactive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnParams {
    /// kNN mode: only neighbours of this many sampled members are pooled.
    pub knn_member_cap: usize,
    /// aNN mode: unseen candidates drawn per query.
    pub ann_candidate_cap: usize,
    /// aNN mode: bucket members each candidate is compared against.
    pub ann_member_cap: usize,
}

impl Default for NnParams {
    fn default() -> Self {
        NnParams {
            knn_member_cap: 50,
            ann_candidate_cap: 50_000,
            ann_member_cap: 25,
        }
    }
}

impl NnParams {
    /// No sampling at all: exhaustive search.
    pub fn exhaustive() -> Self {
        NnParams {
            knn_member_cap: usize::MAX,
            ann_candidate_cap: usize::MAX,
            ann_member_cap: usize::MAX,
        }
    }
}

/// Members whose neighbours are pooled, and the pooled neighbour ids
/// (sorted, deduplicated, not yet filtered).
pub fn knn_pool<R: Rng + ?Sized>(
    members: &[ImageId],
    knn: &KnnMatrix,
    member_cap: usize,
    rng: &mut R,
) -> (Vec<ImageId>, Vec<ImageId>) {
    let sampled = if members.len() > member_cap {
        sample_slice(members, member_cap, rng)
    } else {
        members.to_vec()
    };
    let pool: BTreeSet<u32> = sampled
        .iter()
        .flat_map(|&m| knn.neighbors(m).iter().copied())
        .collect();
    (sampled, pool.into_iter().map(ImageId).collect())
}

/// kNN mode: sample up to `count` ids uniformly from the recorded neighbours
/// of the bucket, skipping excluded ids.
pub fn knn_suggest<R: Rng + ?Sized>(
    members: &[ImageId],
    knn: &KnnMatrix,
    count: usize,
    excluded: impl Fn(ImageId) -> bool,
    member_cap: usize,
    rng: &mut R,
) -> Vec<ImageId> {
    if members.is_empty() || count == 0 {
        return Vec::new();
    }
    let (_, pool) = knn_pool(members, knn, member_cap, rng);
    let open: Vec<ImageId> = pool.into_iter().filter(|&id| !excluded(id)).collect();
    sample_slice(&open, count, rng)
}

/// aNN mode: sample unseen candidates, score each by its minimum asymmetric
/// PQ distance to a sample of bucket members, and return the `count` closest
/// with their distances. Ties go to the lower image id.
pub fn ann_search<R: Rng + ?Sized>(
    members: &[ImageId],
    collection: &Collection,
    index: &PqIndex,
    count: usize,
    excluded: impl Fn(ImageId) -> bool,
    params: &NnParams,
    rng: &mut R,
) -> Vec<(ImageId, f32)> {
    if members.is_empty() || count == 0 {
        return Vec::new();
    }
    let n = index.codes.len();
    let candidates = sample_unseen(n, params.ann_candidate_cap, |i| excluded(ImageId(i)), rng);
    if candidates.is_empty() {
        return Vec::new();
    }
    let probes = if members.len() > params.ann_member_cap {
        sample_slice(members, params.ann_member_cap, rng)
    } else {
        members.to_vec()
    };
    let tables: Vec<_> = probes
        .iter()
        .map(|&m| index.codebook.adc_table(collection.abstract_vec(m)))
        .collect();

    let mut scored: Vec<(f32, u32)> = candidates
        .into_iter()
        .map(|c| {
            let code = index.codes.code(c as usize);
            let d = tables
                .iter()
                .map(|t| t.distance(code))
                .fold(f32::INFINITY, f32::min);
            (d, c)
        })
        .collect();
    let order = |a: &(f32, u32), b: &(f32, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if scored.len() > count {
        scored.select_nth_unstable_by(count - 1, order);
        scored.truncate(count);
    }
    scored.sort_unstable_by(order);
    scored.into_iter().map(|(d, c)| (ImageId(c), d)).collect()
}
