#![allow(dead_code)]

use ii20_core::dataset::synth::{generate, SynthConfig};
use ii20_core::dataset::{Collection, GroundTruth};
use ii20_core::engine::Dataset;
use ii20_core::pq::{KnnBuildConfig, PqConfig, PqIndex};

pub fn small_synth(n: usize, clusters: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n,
        clusters,
        seed,
        abstract_dim: 32,
        concept_dim: 128,
        ..SynthConfig::default()
    }
}

pub fn index_for(collection: &Collection, seed: u64) -> PqIndex {
    let cfg = PqConfig {
        m: 8,
        k_cap: 64,
        seed,
        ..PqConfig::default()
    };
    PqIndex::build(collection, &cfg).unwrap()
}

pub fn dataset(cfg: &SynthConfig, with_knn: bool) -> (Dataset, GroundTruth) {
    let (collection, truth) = generate(cfg).unwrap();
    let index = index_for(&collection, cfg.seed);
    let knn = with_knn.then(|| index.build_knn(&KnnBuildConfig::default()).unwrap());
    (Dataset::new(collection, index, knn).unwrap(), truth)
}
