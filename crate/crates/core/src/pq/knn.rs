use rayon::prelude::*;

use super::codebook::{PqCodes, SdcTable};
use crate::error::{Error, Result};
use crate::ids::ImageId;

pub const DEFAULT_KNN: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct KnnBuildConfig {
    pub k: usize,
    /// Refuse builds whose estimated working set exceeds this many bytes.
    pub max_bytes: u64,
}

impl Default for KnnBuildConfig {
    fn default() -> Self {
        KnnBuildConfig {
            k: DEFAULT_KNN,
            max_bytes: 2 << 30,
        }
    }
}

/// `K` nearest other images per image, ascending by symmetric PQ distance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnnMatrix {
    per_row: usize,
    neighbors: Vec<u32>,
}

impl KnnMatrix {
    pub fn from_rows(per_row: usize, neighbors: Vec<u32>) -> Result<Self> {
        if per_row == 0 && !neighbors.is_empty() || per_row > 0 && !neighbors.len().is_multiple_of(per_row) {
            return Err(Error::InvalidParameter("neighbour table is not rectangular".into()));
        }
        Ok(KnnMatrix { per_row, neighbors })
    }

    pub fn per_row(&self) -> usize {
        self.per_row
    }

    pub fn len(&self) -> usize {
        self.neighbors.len().checked_div(self.per_row).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, id: ImageId) -> &[u32] {
        &self.neighbors[id.index() * self.per_row..(id.index() + 1) * self.per_row]
    }

    pub fn raw(&self) -> &[u32] {
        &self.neighbors
    }
}

/// Working-set estimate: the matrix itself plus one distance row per thread.
pub fn estimated_bytes(n: usize, k: usize) -> u64 {
    let per_row = k.min(n.saturating_sub(1)) as u64;
    let threads = rayon::current_num_threads() as u64;
    n as u64 * per_row * 4 + threads * n as u64 * 8
}

pub fn build_knn_matrix(codes: &PqCodes, sdc: &SdcTable, cfg: &KnnBuildConfig) -> Result<KnnMatrix> {
    let n = codes.len();
    let needed = estimated_bytes(n, cfg.k);
    if needed > cfg.max_bytes {
        return Err(Error::KnnTooLarge {
            needed,
            cap: cfg.max_bytes,
        });
    }
    let per_row = cfg.k.min(n.saturating_sub(1));
    let mut neighbors = vec![0u32; n * per_row];
    if per_row == 0 {
        return KnnMatrix::from_rows(0, Vec::new());
    }

    neighbors.par_chunks_mut(per_row).enumerate().for_each_init(
        || Vec::with_capacity(n),
        |scratch: &mut Vec<(f32, u32)>, (i, out)| {
            scratch.clear();
            let rows = sdc.rows_for(codes.code(i));
            scratch.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (rows.distance(codes.code(j)), j as u32)),
            );
            let order = |a: &(f32, u32), b: &(f32, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if scratch.len() > per_row {
                scratch.select_nth_unstable_by(per_row - 1, order);
                scratch.truncate(per_row);
            }
            scratch.sort_unstable_by(order);
            for (slot, &(_, j)) in out.iter_mut().zip(scratch.iter()) {
                *slot = j;
            }
        },
    );
    KnnMatrix::from_rows(per_row, neighbors)
}
