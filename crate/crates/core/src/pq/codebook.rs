use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, nearest, squared_l2};
use crate::dataset::Collection;
use crate::error::{Error, Result};

/// Product-quantization training parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PqConfig {
    /// Subquantizer count; must divide the abstract dimension.
    pub m: usize,
    /// Upper bound on centroids per subquantizer; the actual count is
    /// `min(k_cap, floor(sqrt(n)))`.
    pub k_cap: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// k-means sees at most `k * max_points_per_centroid` vectors.
    pub max_points_per_centroid: usize,
}

impl Default for PqConfig {
    fn default() -> Self {
        PqConfig {
            m: 32,
            k_cap: 1024,
            max_iter: 25,
            seed: 0,
            max_points_per_centroid: 256,
        }
    }
}

pub fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Centroids per subquantizer for a collection of `n` images.
pub fn codebook_size(n: usize, k_cap: usize) -> usize {
    k_cap.min(isqrt(n))
}

/// Code of one image: a centroid id per subquantizer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PqCode(pub Vec<u16>);

/// Trained subquantizer centroids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PqCodebook {
    pub dim: usize,
    pub m: usize,
    pub k: usize,
    pub sub_dim: usize,
    /// `m * k * sub_dim` values: subquantizer-major, then centroid, then coordinate.
    pub centroids: Vec<f32>,
    /// k-means rounds used per subquantizer.
    pub iterations: Vec<u32>,
    pub seed: u64,
}

impl PqCodebook {
    pub fn from_centroids(dim: usize, m: usize, k: usize, centroids: Vec<f32>) -> Result<Self> {
        if m == 0 || !dim.is_multiple_of(m) || k == 0 || k > usize::from(u16::MAX) + 1 {
            return Err(Error::InvalidParameter(format!("bad codebook shape dim={dim} m={m} k={k}")));
        }
        let sub_dim = dim / m;
        if centroids.len() != m * k * sub_dim || centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("centroid table has the wrong size or non-finite values".into()));
        }
        Ok(PqCodebook {
            dim,
            m,
            k,
            sub_dim,
            centroids,
            iterations: vec![0; m],
            seed: 0,
        })
    }

    fn subquantizer(&self, s: usize) -> &[f32] {
        let len = self.k * self.sub_dim;
        &self.centroids[s * len..(s + 1) * len]
    }

    pub fn centroid(&self, s: usize, c: usize) -> &[f32] {
        let start = (s * self.k + c) * self.sub_dim;
        &self.centroids[start..start + self.sub_dim]
    }

    pub fn encode_into(&self, x: &[f32], out: &mut [u16]) {
        debug_assert_eq!(x.len(), self.dim);
        for (s, (block, slot)) in x.chunks_exact(self.sub_dim).zip(out.iter_mut()).enumerate() {
            *slot = nearest(self.subquantizer(s), self.sub_dim, block).0 as u16;
        }
    }

    pub fn encode(&self, x: &[f32]) -> PqCode {
        let mut code = vec![0u16; self.m];
        self.encode_into(x, &mut code);
        PqCode(code)
    }

    pub fn decode(&self, code: &[u16]) -> Vec<f32> {
        code.iter()
            .enumerate()
            .flat_map(|(s, &c)| self.centroid(s, c as usize).iter().copied())
            .collect()
    }

    /// Asymmetric distance computed directly: sum over sub-blocks of the
    /// squared distance from the query block to the coded centroid.
    pub fn adc_distance(&self, query: &[f32], code: &[u16]) -> f32 {
        query
            .chunks_exact(self.sub_dim)
            .zip(code)
            .enumerate()
            .map(|(s, (block, &c))| squared_l2(block, self.centroid(s, c as usize)))
            .sum()
    }

    /// Per-query lookup table for fast asymmetric distances.
    pub fn adc_table(&self, query: &[f32]) -> AdcTable {
        let mut table = Vec::with_capacity(self.m * self.k);
        for (s, block) in query.chunks_exact(self.sub_dim).enumerate() {
            table.extend(self.subquantizer(s).chunks_exact(self.sub_dim).map(|c| squared_l2(block, c)));
        }
        AdcTable { k: self.k, table }
    }

    /// Centroid-to-centroid table for symmetric code-to-code distances.
    pub fn sdc_table(&self) -> SdcTable {
        let (m, k) = (self.m, self.k);
        let mut table = vec![0.0f32; m * k * k];
        table.par_chunks_mut(k * k).enumerate().for_each(|(s, block)| {
            for a in 0..k {
                for b in a + 1..k {
                    let d = squared_l2(self.centroid(s, a), self.centroid(s, b));
                    block[a * k + b] = d;
                    block[b * k + a] = d;
                }
            }
        });
        SdcTable { m, k, table }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdcTable {
    k: usize,
    table: Vec<f32>,
}

impl AdcTable {
    #[inline]
    pub fn distance(&self, code: &[u16]) -> f32 {
        code.iter()
            .enumerate()
            .map(|(s, &c)| self.table[s * self.k + c as usize])
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdcTable {
    m: usize,
    k: usize,
    table: Vec<f32>,
}

impl SdcTable {
    #[inline]
    pub fn distance(&self, a: &[u16], b: &[u16]) -> f32 {
        let kk = self.k * self.k;
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(s, (&x, &y))| self.table[s * kk + x as usize * self.k + y as usize])
            .sum()
    }

    /// Rows of the table for code `a`, so distances from `a` to many codes
    /// cost one lookup per subquantizer.
    pub fn rows_for<'a>(&'a self, a: &[u16]) -> SdcRows<'a> {
        let kk = self.k * self.k;
        let rows = a
            .iter()
            .enumerate()
            .map(|(s, &x)| {
                let start = s * kk + x as usize * self.k;
                &self.table[start..start + self.k]
            })
            .collect();
        SdcRows { rows }
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

pub struct SdcRows<'a> {
    rows: Vec<&'a [f32]>,
}

impl SdcRows<'_> {
    #[inline]
    pub fn distance(&self, b: &[u16]) -> f32 {
        self.rows.iter().zip(b).map(|(row, &y)| row[y as usize]).sum()
    }
}

/// Codes for every image, `m` ids per image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PqCodes {
    pub m: usize,
    pub codes: Vec<u16>,
}

impl PqCodes {
    pub fn len(&self) -> usize {
        self.codes.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    #[inline]
    pub fn code(&self, i: usize) -> &[u16] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }
}

/// Train a codebook on a collection's abstract vectors.
pub fn train_codebook(collection: &Collection, cfg: &PqConfig) -> Result<PqCodebook> {
    if cfg.k_cap == 0 {
        return Err(Error::InvalidParameter("k_cap must be at least 1".into()));
    }
    let k = codebook_size(collection.len(), cfg.k_cap);
    train_codebook_on(collection.abstract_matrix(), collection.abstract_dim(), k, cfg)
}

/// Train with an explicit centroid count `k` on row-major `data`.
pub fn train_codebook_on(data: &[f32], dim: usize, k: usize, cfg: &PqConfig) -> Result<PqCodebook> {
    if cfg.m == 0 || !dim.is_multiple_of(cfg.m) {
        return Err(Error::InvalidParameter(format!(
            "m={} must divide the abstract dimension {dim}",
            cfg.m
        )));
    }
    if k == 0 || k > usize::from(u16::MAX) + 1 {
        return Err(Error::InvalidParameter(format!("k={k} out of range")));
    }
    let n = data.len() / dim;
    if n < k {
        return Err(Error::TooFewVectors { n, k });
    }
    let sub_dim = dim / cfg.m;

    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let budget = k.saturating_mul(cfg.max_points_per_centroid.max(1));
    let rows: Vec<usize> = if n > budget {
        let mut picked = index::sample(&mut sample_rng, n, budget).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..n).collect()
    };

    let trained: Vec<(Vec<f32>, u32)> = (0..cfg.m)
        .into_par_iter()
        .map(|s| {
            let mut block = Vec::with_capacity(rows.len() * sub_dim);
            for &r in &rows {
                let start = r * dim + s * sub_dim;
                block.extend_from_slice(&data[start..start + sub_dim]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64 + 1);
            let km = kmeans(&block, sub_dim, k, cfg.max_iter, &mut rng);
            (km.centroids, km.iterations as u32)
        })
        .collect();

    let mut centroids = Vec::with_capacity(cfg.m * k * sub_dim);
    let mut iterations = Vec::with_capacity(cfg.m);
    for (c, it) in trained {
        centroids.extend(c);
        iterations.push(it);
    }
    Ok(PqCodebook {
        dim,
        m: cfg.m,
        k,
        sub_dim,
        centroids,
        iterations,
        seed: cfg.seed,
    })
}

/// Encode every row of `data`.
pub fn encode_all(codebook: &PqCodebook, data: &[f32]) -> PqCodes {
    let m = codebook.m;
    let n = data.len() / codebook.dim;
    let mut codes = vec![0u16; n * m];
    codes
        .par_chunks_mut(m)
        .zip(data.par_chunks_exact(codebook.dim))
        .for_each(|(out, x)| codebook.encode_into(x, out));
    PqCodes { m, codes }
}
