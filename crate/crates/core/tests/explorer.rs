mod common;

use std::collections::HashSet;

use ii20_core::dataset::synth::{generate, SynthConfig};
use ii20_core::engine::{candidate_pool_size, explore, DistanceCache};
use ii20_core::ImageId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_clusters() -> (ii20_core::dataset::Collection, ii20_core::dataset::GroundTruth, ii20_core::pq::PqIndex) {
    let cfg = SynthConfig {
        n: 2000,
        clusters: 2,
        seed: 21,
        abstract_dim: 32,
        concept_dim: 64,
        ..SynthConfig::default()
    };
    let (c, t) = generate(&cfg).unwrap();
    let index = common::index_for(&c, 21);
    (c, t, index)
}

#[test]
fn explorer_leaves_the_processed_cluster() {
    let (_, truth, index) = two_clusters();
    let processed: Vec<ImageId> = truth.images_with(0).take(100).collect();
    let seen: HashSet<ImageId> = processed.iter().copied().collect();
    let mut cache = DistanceCache::default();
    let mut in_b = 0;
    let mut total = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = explore(&index, &mut cache, &processed, |id| seen.contains(&id), 5, 100, &mut rng);
        assert_eq!(picks.len(), 5);
        total += picks.len();
        in_b += picks.iter().filter(|&&i| truth.labels_of(i)[0] == 1).count();
    }
    let frac = in_b as f64 / total as f64;
    assert!(frac >= 0.8, "{frac}");
}

#[test]
fn empty_processed_set_gives_uniform_sample() {
    let (_, _, index) = two_clusters();
    let mut cache = DistanceCache::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let picks = explore(&index, &mut cache, &[], |_| false, 5, 100, &mut rng);
    assert_eq!(picks.len(), 5);
    assert_eq!(picks.iter().collect::<HashSet<_>>().len(), 5);
}

#[test]
fn pool_is_one_hundred_times_the_request() {
    assert_eq!(candidate_pool_size(3, 100), 300);
    // With exactly 300 unseen images the explorer ranks all of them.
    let (_, _, index) = two_clusters();
    let processed: Vec<ImageId> = (0..1700).map(ImageId).collect();
    let seen: HashSet<ImageId> = processed.iter().copied().collect();
    let mut cache = DistanceCache::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let picks = explore(&index, &mut cache, &processed, |id| seen.contains(&id), 3, 100, &mut rng);
    let mut all: Vec<(f32, u32)> = (1700..2000u32)
        .map(|c| {
            let d = processed
                .iter()
                .map(|p| index.sdc.distance(index.codes.code(c as usize), index.codes.code(p.index())))
                .fold(f32::INFINITY, f32::min);
            (d, c)
        })
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let expect: Vec<ImageId> = all[..3].iter().map(|p| ImageId(p.1)).collect();
    assert_eq!(picks, expect);
}

#[test]
fn all_processed_gives_nothing() {
    let (_, _, index) = two_clusters();
    let processed: Vec<ImageId> = (0..2000).map(ImageId).collect();
    let mut cache = DistanceCache::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(explore(&index, &mut cache, &processed, |_| true, 5, 100, &mut rng).is_empty());
}

#[test]
fn incremental_and_direct_distances_agree() {
    let (_, _, index) = two_clusters();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let processed: Vec<ImageId> = (0..40).map(|i| ImageId(i * 37)).collect();
    let candidates: Vec<u32> = ii20_core::sampling::sample_unseen(2000, 50, |i| i % 37 == 0, &mut rng);
    // few candidates: direct scan
    let mut direct = DistanceCache::default();
    let a = direct.distances(&index, &processed, &candidates[..2]);
    // grow the processed set gradually: incremental path
    let mut inc = DistanceCache::default();
    for k in 1..=processed.len() {
        inc.distances(&index, &processed[..k], &candidates);
    }
    let b = inc.distances(&index, &processed, &candidates[..2]);
    assert_eq!(a, b);
    let full = inc.distances(&index, &processed, &candidates);
    let brute: Vec<f32> = candidates
        .iter()
        .map(|&c| {
            processed
                .iter()
                .map(|p| index.sdc.distance(index.codes.code(c as usize), index.codes.code(p.index())))
                .fold(f32::INFINITY, f32::min)
        })
        .collect();
    assert_eq!(full, brute);
}
