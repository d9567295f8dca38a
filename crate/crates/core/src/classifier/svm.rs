//! L2-regularized, L1-loss (hinge) linear SVM trained by dual coordinate
//! descent. The bias is learned as the weight of a constant feature.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseRow;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the projected-gradient spread falls below this.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Value of the constant bias feature.
    pub bias_feature: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tolerance: 0.01,
            max_epochs: 1000,
            bias_feature: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
}

/// Fit on labelled sparse rows; `labels[i]` is true for positives.
pub fn train_svm(rows: &[SparseRow<'_>], labels: &[bool], dim: usize, params: &SvmParams) -> SvmModel {
    train_svm_weighted(rows, labels, &vec![1.0; rows.len()], dim, params)
}

/// Like [`train_svm`], with row `i`'s dual variable bounded by `c * costs[i]`.
pub fn train_svm_weighted(
    rows: &[SparseRow<'_>],
    labels: &[bool],
    costs: &[f64],
    dim: usize,
    params: &SvmParams,
) -> SvmModel {
    assert_eq!(rows.len(), labels.len());
    assert_eq!(rows.len(), costs.len());
    let n = rows.len();
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut alpha = vec![0.0f64; n];
    let bf = params.bias_feature;
    let diag: Vec<f64> = rows.iter().map(|r| r.squared_norm() + bf * bf).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let upper: Vec<f64> = costs.iter().map(|&c| params.c * c).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut epochs = 0;
    while epochs < params.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            if diag[i] <= 0.0 {
                continue;
            }
            let g = y[i] * (rows[i].dot(&w) + b * bf) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper[i] {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, upper[i]);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    for (j, v) in rows[i].iter() {
                        w[j as usize] += step * f64::from(v);
                    }
                    b += step * bf;
                }
            }
        }
        if n == 0 || pg_max - pg_min <= params.tolerance {
            break;
        }
    }
    SvmModel {
        weights: w,
        bias: b * bf,
        epochs,
    }
}
