//! Planted-cluster synthetic collections with ground-truth labels.
//!
//! Every cluster gets a Gaussian centre in the abstract space and a small
//! signature of concepts that fire strongly for its members; every image also
//! carries a handful of random low-valued background concepts. With
//! `needles > 0` the generator builds a needles-in-a-haystack layout: the
//! first `needles` clusters are rare, each optionally shadowed by a "red
//! herring" cluster that shares part of its concept signature and sits
//! nearby in the abstract space, and the remaining clusters split the rest.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Collection, CollectionBuilder, GroundTruth};
use crate::error::{Error, Result};
use crate::ids::ImageId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub clusters: usize,
    pub seed: u64,
    pub abstract_dim: usize,
    pub concept_dim: usize,
    pub top_t: usize,
    /// Number of rare clusters; 0 gives equally sized clusters.
    pub needles: usize,
    pub needle_prevalence: f64,
    /// Prevalence of the herring cluster paired with each needle.
    pub herring_prevalence: f64,
    /// Fraction of a needle's concept signature its herring shares; 0 disables herrings.
    pub herring_overlap: f64,
    pub abstract_noise: f32,
    pub signature_concepts: usize,
    pub background_concepts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 10_000,
            clusters: 8,
            seed: 0,
            abstract_dim: 128,
            concept_dim: 512,
            top_t: 25,
            needles: 0,
            needle_prevalence: 0.05,
            herring_prevalence: 0.14,
            herring_overlap: 0.6,
            abstract_noise: 0.6,
            signature_concepts: 10,
            background_concepts: 20,
        }
    }
}

impl SynthConfig {
    /// 8 clusters, 2 needles at 5% prevalence, each with a red herring.
    pub fn needles_in_haystack(n: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            clusters: 8,
            seed,
            needles: 2,
            ..SynthConfig::default()
        }
    }

    fn herrings(&self) -> usize {
        if self.needles > 0 && self.herring_overlap > 0.0 {
            self.needles
        } else {
            0
        }
    }

    /// Images per cluster, in cluster order.
    pub fn cluster_sizes(&self) -> Result<Vec<usize>> {
        if self.n == 0 || self.clusters == 0 {
            return Err(Error::InvalidParameter("n and clusters must be positive".into()));
        }
        if self.signature_concepts > self.concept_dim {
            return Err(Error::InvalidParameter("signature larger than the concept space".into()));
        }
        let rare = self.needles + self.herrings();
        if rare >= self.clusters && self.needles > 0 {
            return Err(Error::InvalidParameter(format!(
                "{} clusters cannot hold {} needle/herring clusters plus background",
                self.clusters, rare
            )));
        }
        let mut sizes = Vec::with_capacity(self.clusters);
        let needle = (self.n as f64 * self.needle_prevalence).round() as usize;
        let herring = (self.n as f64 * self.herring_prevalence).round() as usize;
        sizes.extend(std::iter::repeat_n(needle, self.needles));
        sizes.extend(std::iter::repeat_n(herring, self.herrings()));
        let used: usize = sizes.iter().sum();
        if used >= self.n {
            return Err(Error::InvalidParameter("prevalences leave no room for background clusters".into()));
        }
        let rest = self.clusters - rare;
        let left = self.n - used;
        for i in 0..rest {
            sizes.push(left / rest + usize::from(i < left % rest));
        }
        Ok(sizes)
    }
}

pub fn cluster_label(cluster: usize) -> String {
    format!("cluster_{cluster}")
}

/// Generate the collection and its ground truth (one `cluster_<j>` label per image).
pub fn generate(cfg: &SynthConfig) -> Result<(Collection, GroundTruth)> {
    let sizes = cfg.cluster_sizes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut assignment: Vec<u32> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c as u32, s))
        .collect();
    assignment.shuffle(&mut rng);

    let gaussian = |rng: &mut ChaCha8Rng, dim: usize| -> Vec<f32> {
        (0..dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
    };
    let mut centres: Vec<Vec<f32>> = (0..cfg.clusters).map(|_| gaussian(&mut rng, cfg.abstract_dim)).collect();
    let mut signatures: Vec<Vec<(u32, f32)>> = (0..cfg.clusters)
        .map(|_| random_signature(&mut rng, cfg.concept_dim, cfg.signature_concepts, &[]))
        .collect();

    // Herring j shadows needle j.
    for j in 0..cfg.herrings() {
        let h = cfg.needles + j;
        let fresh = gaussian(&mut rng, cfg.abstract_dim);
        centres[h] = centres[j].iter().zip(&fresh).map(|(a, b)| 0.6 * a + 0.8 * b).collect();
        let shared = ((cfg.signature_concepts as f64) * cfg.herring_overlap).round() as usize;
        let mut kept: Vec<(u32, f32)> = signatures[j][..shared.min(signatures[j].len())]
            .iter()
            .map(|&(c, _)| (c, rng.random_range(0.4..1.0)))
            .collect();
        let taken: Vec<u32> = signatures[j].iter().map(|&(c, _)| c).collect();
        kept.extend(random_signature(
            &mut rng,
            cfg.concept_dim,
            cfg.signature_concepts - kept.len(),
            &taken,
        ));
        signatures[h] = kept;
    }

    let mut builder = CollectionBuilder::new(cfg.abstract_dim, cfg.concept_dim, cfg.top_t)
        .name(format!("synth-n{}-c{}-s{}", cfg.n, cfg.clusters, cfg.seed));
    builder.reserve(cfg.n);
    let mut truth = GroundTruth::new(cfg.n);
    for c in 0..cfg.clusters {
        // keep the dictionary ordered by cluster index
        let _ = truth.label_index(&cluster_label(c));
    }
    let mut abstract_row = vec![0.0f32; cfg.abstract_dim];
    let mut concept_row = vec![0.0f32; cfg.concept_dim];
    for (i, &c) in assignment.iter().enumerate() {
        let c = c as usize;
        for (x, &mu) in abstract_row.iter_mut().zip(&centres[c]) {
            *x = mu + cfg.abstract_noise * rng.sample::<f32, _>(StandardNormal);
        }
        concept_row.iter_mut().for_each(|v| *v = 0.0);
        for &(concept, weight) in &signatures[c] {
            if rng.random_bool(0.8) {
                concept_row[concept as usize] = weight * rng.random_range(0.5..1.0);
            }
        }
        for _ in 0..cfg.background_concepts {
            let concept = rng.random_range(0..cfg.concept_dim);
            let v = rng.random_range(0.0..0.5f32);
            concept_row[concept] = concept_row[concept].max(v);
        }
        builder.push_dense(&abstract_row, &concept_row)?;
        truth.add(ImageId(i as u32), &cluster_label(c))?;
    }
    Ok((builder.build()?, truth))
}

fn random_signature(rng: &mut ChaCha8Rng, dim: usize, size: usize, avoid: &[u32]) -> Vec<(u32, f32)> {
    let mut out: Vec<(u32, f32)> = Vec::with_capacity(size);
    while out.len() < size {
        let c = rng.random_range(0..dim as u32);
        if avoid.contains(&c) || out.iter().any(|&(x, _)| x == c) {
            continue;
        }
        out.push((c, rng.random_range(0.4..1.0)));
    }
    out
}

/// Generate and write `manifest.json`, the feature files and `labels.csv`
/// into `dir`. Returns the manifest path.
pub fn write(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let (collection, truth) = generate(cfg)?;
    let manifest = collection.save(dir.as_ref())?;
    truth.save_csv(dir.as_ref().join("labels.csv"))?;
    Ok(manifest)
}
