//! Sparse concept vectors and top-t sparsification.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Sparse vector stored as parallel, strictly increasing index and value lists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f32>,
}

impl SparseVec {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn as_row(&self) -> SparseRow<'_> {
        SparseRow {
            indices: &self.indices,
            values: &self.values,
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f32> {
        self.as_row().to_dense(dim)
    }
}

/// Borrowed view of one sparse row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f32],
}

impl<'a> SparseRow<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f32)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Dot product against a dense weight vector. Indices past the end of
    /// `weights` contribute nothing.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter()
            .filter_map(|(i, v)| weights.get(i as usize).map(|w| w * f64::from(v)))
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f32> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }

    pub fn to_owned(&self) -> SparseVec {
        SparseVec {
            indices: self.indices.to_vec(),
            values: self.values.to_vec(),
        }
    }
}

/// Keep the `t` largest entries of a dense concept row.
///
/// Only strictly positive entries are eligible, so the result may hold fewer
/// than `t` entries. Ties go to the lower concept index. The returned indices
/// are sorted ascending.
pub fn compress_concepts(dense_row: &[f32], t: usize) -> SparseVec {
    let mut kept: Vec<(u32, f32)> = dense_row
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i as u32, v))
        .collect();

    if kept.len() > t {
        // larger value first, then lower index
        let order = |a: &(u32, f32), b: &(u32, f32)| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        };
        if t == 0 {
            kept.clear();
        } else {
            kept.select_nth_unstable_by(t - 1, order);
            kept.truncate(t);
        }
    }
    kept.sort_unstable_by_key(|&(i, _)| i);

    let (indices, values) = kept.into_iter().unzip();
    SparseVec { indices, values }
}
